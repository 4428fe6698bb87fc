#pragma once

#include "dece/rational.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dece {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct GoldAnswer {
    std::string required;  // essential content; source of recall criteria
    std::string helpful;   // supportive material; may be empty

    /// Full gold text: required joined to helpful by a single blank line.
    std::string full_text() const;

    bool operator==(const GoldAnswer&) const = default;
};

struct InstanceMetadata {
    std::optional<std::string> jurisdiction;
    std::optional<std::string> query_type;
    std::map<std::string, std::string> extra;

    bool operator==(const InstanceMetadata&) const = default;
};

/// One (query, gold answer, model answers, metadata) record; the unit of
/// evaluation. Immutable after validation, safe to share across workers.
struct EvaluationInstance {
    std::string id;
    std::string query;
    std::vector<std::string> search_results;  // opaque document texts
    GoldAnswer gold;
    std::map<std::string, std::string> model_answers;  // model id -> answer
    InstanceMetadata metadata;

    bool operator==(const EvaluationInstance&) const = default;
};

enum class Provenance { llm_generated, expert_modified, expert_added };

const char* provenance_name(Provenance p);

/// One atomic requirement extracted from the gold answer's required content.
struct Criterion {
    int index = 0;  // 1-based, contiguous within a criteria set
    std::string text;
    Provenance provenance = Provenance::llm_generated;

    bool operator==(const Criterion&) const = default;
};

/// One atomic claim extracted from a model answer.
struct ElementItem {
    int index = 0;  // 1-based, contiguous
    std::string text;

    bool operator==(const ElementItem&) const = default;
};

enum class VerdictTarget { criteria, elements };

/// Binary scores plus reasoning from one judge call, aligned 1:1 with the
/// criteria or elements that were judged.
struct VerdictSet {
    VerdictTarget target = VerdictTarget::criteria;
    std::vector<int> scores;  // each 0 or 1
    std::vector<std::string> reasoning;

    bool operator==(const VerdictSet&) const = default;
};

enum class ScoreFlag { no_elements, no_criteria, no_answer };

const char* score_flag_name(ScoreFlag f);

/// Decomposed (precision, recall, f_beta) for one (instance, model) pair.
/// Values are exact rationals until report rendering.
struct DecomposedScore {
    Rational precision = 0;
    Rational recall = 0;
    Rational f_beta = 0;
    Rational beta = 2;
    std::size_t element_count = 0;
    std::size_t criteria_count = 0;
    std::set<ScoreFlag> flags;

    bool operator==(const DecomposedScore&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ValidationCode {
    MissingField,
    EmptyRequiredInfo,
    DuplicateId,
    UnknownLabel,
    BadType,
    NoModelAnswers,
};

const char* validation_code_name(ValidationCode c);

struct ValidationIssue {
    ValidationCode code;
    std::string field;
    std::string message;
};

/// Carries every violated invariant of one record, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<ValidationIssue> issues);
    const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
    std::vector<ValidationIssue> issues_;
};

/// Label sets declared by a dataset header. An absent set leaves that label
/// unconstrained.
struct LabelSets {
    std::optional<std::vector<std::string>> jurisdictions;
    std::optional<std::vector<std::string>> query_types;
};

/// Tracks cross-record state (id uniqueness, declared label sets) while a
/// dataset is being validated record by record.
class ValidationContext {
public:
    ValidationContext() = default;
    explicit ValidationContext(LabelSets labels) : labels_(std::move(labels)) {}

    const LabelSets& labels() const { return labels_; }
    bool id_seen(const std::string& id) const { return seen_ids_.count(id) > 0; }
    void mark_seen(const std::string& id) { seen_ids_.insert(id); }

private:
    LabelSets labels_;
    std::set<std::string> seen_ids_;
};

/// Validates one parsed dataset record. Throws ValidationError listing every
/// violated invariant. Never crashes on malformed input.
EvaluationInstance validate_instance(const json& raw, ValidationContext& ctx);

json instance_to_json(const EvaluationInstance& inst);

}  // namespace dece
