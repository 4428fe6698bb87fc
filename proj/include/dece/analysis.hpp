#pragma once

#include "dece/baseline_metrics.hpp"
#include "dece/core_model.hpp"
#include "dece/recall_workflow.hpp"
#include "dece/scoring.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dece {

// ---------------------------------------------------------------------------
// Correlation statistics
// ---------------------------------------------------------------------------

enum class StatsErrorKind {
    LengthMismatch,
    ConstantSeries,
    DegenerateSample,
    MissingLabels,
    UnmatchedHuman,
};

class StatsError : public std::runtime_error {
public:
    StatsError(StatsErrorKind kind, const std::string& message);
    StatsErrorKind kind() const { return kind_; }

private:
    StatsErrorKind kind_;
};

/// Product-moment correlation. Requires equal lengths >= 2 and non-constant
/// series.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Fractional (average) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Pearson of the rank-transformed series.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

enum class CorrelationKind { pearson, spearman };

/// Two-sided p from t = r*sqrt((n-2)/(1-r^2)) against Student-t with n-2
/// degrees of freedom; the same t-approximation serves both coefficients.
/// Requires n >= 3 and |r| < 1.
double p_value(double r, std::size_t n, CorrelationKind kind = CorrelationKind::pearson);

struct CorrelationResult {
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
    std::optional<double> p_value_pearson;   // emitted only when n >= 3
    std::optional<double> p_value_spearman;
    std::size_t n = 0;
};

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Human judgments
// ---------------------------------------------------------------------------

struct HumanJudgment {
    std::string instance_id;
    std::string model_id;
    std::optional<int> pointwise;     // 0..4
    std::optional<double> precision;  // [0,1]
    std::optional<double> recall;     // [0,1]
};

/// JSONL of {instance_id, model_id, pointwise?, precision?, recall?}; every
/// row must carry at least one judgment field.
std::vector<HumanJudgment> load_human_judgments(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Slicing and quadrants
// ---------------------------------------------------------------------------

/// One (instance, model) pair with everything the analyses join on.
struct ScoreRow {
    std::string instance_id;
    std::string model_id;
    std::optional<std::string> jurisdiction;
    std::optional<std::string> query_type;
    std::optional<DecomposedScore> dece;
    std::optional<int> pointwise;
    std::vector<std::string> pointwise_issues;
    std::optional<RougeScore> rouge;
    std::optional<double> bleu;
};

enum class SliceAxis { jurisdiction, query_type, model };

const char* slice_axis_name(SliceAxis a);
std::optional<SliceAxis> slice_axis_from_name(std::string_view name);

/// Per-group summaries pooled across models (every (instance, model) pair
/// with the group's label contributes). Rows without a DeCE score are
/// skipped; throws MissingLabels when no row carries the axis label.
std::vector<GroupSummary> slice_scores(const std::vector<ScoreRow>& rows, SliceAxis axis,
                                       const AggregateConfig& cfg = {});

enum class Quadrant { strong, precision_weak, recall_weak, failure };

const char* quadrant_name(Quadrant q);

struct QuadrantThresholds {
    double p_thr = 0.5;
    double r_thr = 0.5;
};

/// strong iff P >= p_thr and R >= r_thr (boundary counts as strong); failure
/// iff both below; otherwise weak on the failing axis. Means are compared.
Quadrant classify_quadrant(const GroupSummary& summary, const QuadrantThresholds& thr);

/// Default thresholds: cross-group lower-median of mean precision and of mean
/// recall.
QuadrantThresholds median_thresholds(const std::vector<GroupSummary>& groups);

// ---------------------------------------------------------------------------
// Revision accounting
// ---------------------------------------------------------------------------

struct RevisionAccounting {
    std::size_t original = 0;   // criteria before revision, over all queries
    std::size_t kept = 0;
    std::size_t modified = 0;
    std::size_t discarded = 0;
    std::size_t added = 0;
    std::size_t queries = 0;
    std::size_t verbatim_queries = 0;  // zero modifications/discards/additions

    Rational kept_rate() const;
    Rational modified_rate() const;
    Rational discarded_rate() const;
    Rational verbatim_query_rate() const;
};

/// Aggregates per-query RevisionStats into corpus rates over the original
/// criteria count.
RevisionAccounting revision_stats(const std::vector<std::pair<std::string, RevisionStats>>& per_query);

}  // namespace dece
