#include "dece/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace dece {

namespace {

const char* stats_kind_name(StatsErrorKind k) {
    switch (k) {
        case StatsErrorKind::LengthMismatch: return "LengthMismatch";
        case StatsErrorKind::ConstantSeries: return "ConstantSeries";
        case StatsErrorKind::DegenerateSample: return "DegenerateSample";
        case StatsErrorKind::MissingLabels: return "MissingLabels";
        case StatsErrorKind::UnmatchedHuman: return "UnmatchedHuman";
    }
    return "?";
}

}  // namespace

StatsError::StatsError(StatsErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(stats_kind_name(kind)) + ": " + message), kind_(kind) {}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw StatsError(StatsErrorKind::LengthMismatch,
                         "series of length " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    const std::size_t n = x.size();
    if (n < 2) throw StatsError(StatsErrorKind::DegenerateSample, "need at least 2 points");

    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw StatsError(StatsErrorKind::ConstantSeries, "a constant series has no correlation");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        // positions i..j (0-based) share the average of ranks i+1..j+1
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw StatsError(StatsErrorKind::LengthMismatch,
                         "series of length " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    return pearson(average_ranks(x), average_ranks(y));
}

double p_value(double r, std::size_t n, CorrelationKind) {
    if (n < 3) throw StatsError(StatsErrorKind::DegenerateSample, "p-value needs n >= 3");
    if (!(std::abs(r) < 1.0))
        throw StatsError(StatsErrorKind::DegenerateSample, "|r| must be < 1 for the t-approximation");
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    const boost::math::students_t_distribution<double> dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y) {
    CorrelationResult res;
    res.n = x.size();
    res.pearson_r = pearson(x, y);
    res.spearman_rho = spearman(x, y);
    if (res.n >= 3) {
        if (std::abs(res.pearson_r) < 1.0)
            res.p_value_pearson = p_value(res.pearson_r, res.n, CorrelationKind::pearson);
        if (std::abs(res.spearman_rho) < 1.0)
            res.p_value_spearman = p_value(res.spearman_rho, res.n, CorrelationKind::spearman);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Human judgments
// ---------------------------------------------------------------------------

std::vector<HumanJudgment> load_human_judgments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open human judgments: " + path.string());
    std::vector<HumanJudgment> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("human judgments line " + std::to_string(lineno) +
                                     " is not a JSON object");
        HumanJudgment h;
        h.instance_id = j.at("instance_id").get<std::string>();
        h.model_id = j.at("model_id").get<std::string>();
        if (j.contains("pointwise")) h.pointwise = j["pointwise"].get<int>();
        if (j.contains("precision")) h.precision = j["precision"].get<double>();
        if (j.contains("recall")) h.recall = j["recall"].get<double>();
        if (!h.pointwise && !h.precision && !h.recall)
            throw std::runtime_error("human judgments line " + std::to_string(lineno) +
                                     " carries no judgment field");
        out.push_back(std::move(h));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Slicing
// ---------------------------------------------------------------------------

const char* slice_axis_name(SliceAxis a) {
    switch (a) {
        case SliceAxis::jurisdiction: return "jurisdiction";
        case SliceAxis::query_type: return "query_type";
        case SliceAxis::model: return "model";
    }
    return "?";
}

std::optional<SliceAxis> slice_axis_from_name(std::string_view name) {
    if (name == "jurisdiction") return SliceAxis::jurisdiction;
    if (name == "query_type") return SliceAxis::query_type;
    if (name == "model") return SliceAxis::model;
    return std::nullopt;
}

std::vector<GroupSummary> slice_scores(const std::vector<ScoreRow>& rows, SliceAxis axis,
                                       const AggregateConfig& cfg) {
    std::map<std::string, std::vector<DecomposedScore>> groups;
    for (const auto& row : rows) {
        if (!row.dece) continue;
        std::optional<std::string> label;
        switch (axis) {
            case SliceAxis::jurisdiction: label = row.jurisdiction; break;
            case SliceAxis::query_type: label = row.query_type; break;
            case SliceAxis::model: label = row.model_id; break;
        }
        if (!label) continue;
        groups[*label].push_back(*row.dece);
    }
    if (groups.empty())
        throw StatsError(StatsErrorKind::MissingLabels,
                         std::string("no scored row carries a ") + slice_axis_name(axis) + " label");
    std::vector<GroupSummary> out;
    out.reserve(groups.size());
    for (const auto& [label, scores] : groups) out.push_back(aggregate(scores, label, cfg));
    return out;
}

const char* quadrant_name(Quadrant q) {
    switch (q) {
        case Quadrant::strong: return "strong";
        case Quadrant::precision_weak: return "precision_weak";
        case Quadrant::recall_weak: return "recall_weak";
        case Quadrant::failure: return "failure";
    }
    return "?";
}

Quadrant classify_quadrant(const GroupSummary& summary, const QuadrantThresholds& thr) {
    const bool p_ok = to_double(summary.mean_precision) >= thr.p_thr;
    const bool r_ok = to_double(summary.mean_recall) >= thr.r_thr;
    if (p_ok && r_ok) return Quadrant::strong;
    if (!p_ok && !r_ok) return Quadrant::failure;
    return p_ok ? Quadrant::recall_weak : Quadrant::precision_weak;
}

QuadrantThresholds median_thresholds(const std::vector<GroupSummary>& groups) {
    if (groups.empty())
        throw StatsError(StatsErrorKind::DegenerateSample, "no groups to derive thresholds from");
    std::vector<Rational> ps, rs;
    for (const auto& g : groups) {
        ps.push_back(g.mean_precision);
        rs.push_back(g.mean_recall);
    }
    return QuadrantThresholds{to_double(lower_median(ps)), to_double(lower_median(rs))};
}

// ---------------------------------------------------------------------------
// Revision accounting
// ---------------------------------------------------------------------------

Rational RevisionAccounting::kept_rate() const {
    return original == 0 ? Rational(1) : Rational(static_cast<long>(kept), static_cast<long>(original));
}

Rational RevisionAccounting::modified_rate() const {
    return original == 0 ? Rational(0) : Rational(static_cast<long>(modified), static_cast<long>(original));
}

Rational RevisionAccounting::discarded_rate() const {
    return original == 0 ? Rational(0) : Rational(static_cast<long>(discarded), static_cast<long>(original));
}

Rational RevisionAccounting::verbatim_query_rate() const {
    return queries == 0 ? Rational(1)
                        : Rational(static_cast<long>(verbatim_queries), static_cast<long>(queries));
}

RevisionAccounting revision_stats(const std::vector<std::pair<std::string, RevisionStats>>& per_query) {
    RevisionAccounting acc;
    for (const auto& [id, stats] : per_query) {
        ++acc.queries;
        acc.kept += stats.kept;
        acc.modified += stats.modified;
        acc.discarded += stats.discarded;
        acc.added += stats.added;
        acc.original += stats.original();
        if (stats.modified == 0 && stats.discarded == 0 && stats.added == 0) ++acc.verbatim_queries;
    }
    return acc;
}

}  // namespace dece
