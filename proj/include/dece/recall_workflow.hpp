#pragma once

#include "dece/core_model.hpp"
#include "dece/judge_backend.hpp"

#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dece {

// ---------------------------------------------------------------------------
// Criteria extraction
// ---------------------------------------------------------------------------

/// Criteria are a function of the instance's required gold text and the
/// extraction template, so the cache key hashes both. Extraction for one key
/// runs once; all models of the instance reuse it.
struct CriteriaCacheKey {
    std::string instance_id;
    std::string gold_hash;
    std::string template_hash;

    auto operator<=>(const CriteriaCacheKey&) const = default;
};

CriteriaCacheKey criteria_cache_key(const EvaluationInstance& instance);

/// Per-key serialized, cross-key parallel. Losers of the insertion race wait
/// on the winner's future.
class CriteriaCache {
public:
    std::vector<Criterion> get_or_extract(const CriteriaCacheKey& key,
                                          const std::function<std::vector<Criterion>()>& extract);
    std::size_t extraction_count() const;

private:
    mutable std::mutex mu_;
    std::map<CriteriaCacheKey, std::shared_future<std::vector<Criterion>>> entries_;
    std::size_t extractions_ = 0;
};

/// Strips "N:", "N.", "N)" index prefixes; items are renumbered 1..k by
/// position so indices stay contiguous whatever the judge emitted.
std::vector<Criterion> parse_criteria_items(const std::vector<std::string>& items);

/// Extracts criteria from the instance's required gold text only (the helpful
/// section never reaches the extraction prompt). Zero criteria is treated as
/// a judge failure: re-asked up to the retry limit, then surfaced as
/// EmptyCriteria.
std::vector<Criterion> extract_criteria(const EvaluationInstance& instance, JudgeBackend& backend,
                                        const RetryPolicy& policy = {},
                                        TranscriptSink* transcript = nullptr,
                                        RateLimiter* limiter = nullptr,
                                        CriteriaCache* cache = nullptr);

/// One binary score per criterion in order, judged against the model answer.
VerdictSet judge_satisfaction(const std::vector<Criterion>& criteria,
                              const std::string& model_answer, JudgeBackend& backend,
                              const RetryPolicy& policy = {},
                              TranscriptSink* transcript = nullptr,
                              RateLimiter* limiter = nullptr);

// ---------------------------------------------------------------------------
// Expert revisions
// ---------------------------------------------------------------------------

enum class RevisionAction { keep, modify, discard, add };

const char* revision_action_name(RevisionAction a);
std::optional<RevisionAction> revision_action_from_name(std::string_view name);

struct Revision {
    std::string instance_id;
    RevisionAction action = RevisionAction::keep;
    std::optional<int> index;          // modify/discard/keep target
    std::optional<std::string> new_text;  // modify/add payload
};

/// Offline expert-edit file: JSONL of {instance_id, action, index?, new_text?}.
struct RevisionSet {
    std::map<std::string, std::vector<Revision>> by_instance;

    static RevisionSet load_jsonl(const std::filesystem::path& path);
};

struct RevisionStats {
    std::size_t kept = 0;
    std::size_t modified = 0;
    std::size_t discarded = 0;
    std::size_t added = 0;

    std::size_t original() const { return kept + modified + discarded; }
};

class UnknownCriterionIndex : public std::runtime_error {
public:
    explicit UnknownCriterionIndex(int index);
};

struct RevisionOutcome {
    std::vector<Criterion> criteria;  // indices recompacted 1..n
    RevisionStats stats;
};

/// Applies expert edits to one instance's criteria set. Modified criteria get
/// provenance expert_modified, added ones expert_added; discarded criteria
/// are removed and the remainder renumbered.
RevisionOutcome apply_revisions(const std::vector<Criterion>& criteria,
                                const std::vector<Revision>& revisions);

}  // namespace dece
