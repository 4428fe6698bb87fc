#pragma once

#include "dece/core_model.hpp"
#include "dece/rational.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace dece {

struct FBetaConfig {
    Rational beta = 2;  // F2 by default: recall weighted over precision
};

enum class ScoringErrorKind { EmptyVerdicts, OutOfRangeScore, EmptyGroup, WrongTarget };

class ScoringError : public std::runtime_error {
public:
    ScoringError(ScoringErrorKind kind, const std::string& message);
    ScoringErrorKind kind() const { return kind_; }

private:
    ScoringErrorKind kind_;
};

/// Exact fraction of supported elements. verdicts.target must be elements.
Rational precision_score(const VerdictSet& verdicts);

/// Exact fraction of satisfied criteria. verdicts.target must be criteria.
Rational recall_score(const VerdictSet& verdicts);

/// 0 when p == r == 0; otherwise (1 + beta^2) * p * r / (beta^2 * p + r).
Rational f_beta(const Rational& p, const Rational& r, const FBetaConfig& cfg = {});

/// Assembles a DecomposedScore from raw counts, applying the degenerate-case
/// rules: zero elements scores precision 0 with flag no_elements, zero
/// criteria scores recall 0 with flag no_criteria.
DecomposedScore decomposed_score(std::size_t elements_supported, std::size_t element_count,
                                 std::size_t criteria_satisfied, std::size_t criteria_count,
                                 const FBetaConfig& cfg = {});

DecomposedScore decomposed_score(const VerdictSet& element_verdicts,
                                 const VerdictSet& criteria_verdicts,
                                 const FBetaConfig& cfg = {});

// Pointwise rubric labels, indexed by score 0..4.
extern const std::array<const char*, 5> kRubricLabels;

/// Arithmetic mean of pointwise 0..4 scores.
Rational gpa(const std::vector<int>& scores);

/// Fraction of scores per rubric label; labels with zero scores still appear.
std::map<std::string, Rational> score_distribution(const std::vector<int>& scores);

struct GroupSummary {
    std::string key;
    std::size_t count = 0;  // scores included in the statistics
    Rational mean_precision = 0, median_precision = 0;
    Rational mean_recall = 0, median_recall = 0;
    Rational mean_f = 0, median_f = 0;
    std::size_t no_elements = 0, no_criteria = 0, no_answer = 0;
    std::size_t excluded = 0;
};

struct AggregateConfig {
    // Default: zero-element answers stay in the pool at precision 0.
    bool include_no_elements = true;
};

/// Mean/median P, R, F over a group, with flag tallies. Medians use the
/// lower-median convention. Throws EmptyGroup when nothing remains after
/// filtering.
GroupSummary aggregate(const std::vector<DecomposedScore>& scores, const std::string& key,
                       const AggregateConfig& cfg = {});

}  // namespace dece
