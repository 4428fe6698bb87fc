#include "dece/scoring.hpp"

#include <numeric>

namespace dece {

namespace {

const char* scoring_kind_name(ScoringErrorKind k) {
    switch (k) {
        case ScoringErrorKind::EmptyVerdicts: return "EmptyVerdicts";
        case ScoringErrorKind::OutOfRangeScore: return "OutOfRangeScore";
        case ScoringErrorKind::EmptyGroup: return "EmptyGroup";
        case ScoringErrorKind::WrongTarget: return "WrongTarget";
    }
    return "?";
}

Rational binary_mean(const VerdictSet& verdicts, VerdictTarget want) {
    if (verdicts.target != want)
        throw ScoringError(ScoringErrorKind::WrongTarget, "verdict set targets the other item kind");
    if (verdicts.scores.empty())
        throw ScoringError(ScoringErrorKind::EmptyVerdicts, "no verdicts to score");
    long ones = 0;
    for (int s : verdicts.scores) {
        if (s != 0 && s != 1)
            throw ScoringError(ScoringErrorKind::OutOfRangeScore, "verdict score must be 0 or 1");
        ones += s;
    }
    return Rational(ones, static_cast<long>(verdicts.scores.size()));
}

}  // namespace

ScoringError::ScoringError(ScoringErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(scoring_kind_name(kind)) + ": " + message), kind_(kind) {}

Rational precision_score(const VerdictSet& verdicts) {
    return binary_mean(verdicts, VerdictTarget::elements);
}

Rational recall_score(const VerdictSet& verdicts) {
    return binary_mean(verdicts, VerdictTarget::criteria);
}

Rational f_beta(const Rational& p, const Rational& r, const FBetaConfig& cfg) {
    if (cfg.beta <= 0) throw std::invalid_argument("f_beta: beta must be positive");
    if (p == 0 && r == 0) return 0;
    const Rational b2 = cfg.beta * cfg.beta;
    return (1 + b2) * p * r / (b2 * p + r);
}

DecomposedScore decomposed_score(std::size_t elements_supported, std::size_t element_count,
                                 std::size_t criteria_satisfied, std::size_t criteria_count,
                                 const FBetaConfig& cfg) {
    DecomposedScore s;
    s.beta = cfg.beta;
    s.element_count = element_count;
    s.criteria_count = criteria_count;
    if (element_count > 0) {
        s.precision = Rational(static_cast<long>(elements_supported),
                               static_cast<long>(element_count));
    } else {
        s.flags.insert(ScoreFlag::no_elements);
    }
    if (criteria_count > 0) {
        s.recall = Rational(static_cast<long>(criteria_satisfied),
                            static_cast<long>(criteria_count));
    } else {
        s.flags.insert(ScoreFlag::no_criteria);
    }
    s.f_beta = f_beta(s.precision, s.recall, cfg);
    return s;
}

DecomposedScore decomposed_score(const VerdictSet& element_verdicts,
                                 const VerdictSet& criteria_verdicts, const FBetaConfig& cfg) {
    auto ones = [](const VerdictSet& v) {
        return static_cast<std::size_t>(std::accumulate(v.scores.begin(), v.scores.end(), 0L));
    };
    return decomposed_score(ones(element_verdicts), element_verdicts.scores.size(),
                            ones(criteria_verdicts), criteria_verdicts.scores.size(), cfg);
}

const std::array<const char*, 5> kRubricLabels{"Irrelevant", "Poor", "Fair", "Good", "Excellent"};

Rational gpa(const std::vector<int>& scores) {
    if (scores.empty()) throw ScoringError(ScoringErrorKind::EmptyVerdicts, "no pointwise scores");
    long sum = 0;
    for (int s : scores) {
        if (s < 0 || s > 4)
            throw ScoringError(ScoringErrorKind::OutOfRangeScore,
                               "pointwise score " + std::to_string(s) + " outside 0..4");
        sum += s;
    }
    return Rational(sum, static_cast<long>(scores.size()));
}

std::map<std::string, Rational> score_distribution(const std::vector<int>& scores) {
    if (scores.empty()) throw ScoringError(ScoringErrorKind::EmptyVerdicts, "no pointwise scores");
    std::array<long, 5> counts{};
    for (int s : scores) {
        if (s < 0 || s > 4)
            throw ScoringError(ScoringErrorKind::OutOfRangeScore,
                               "pointwise score " + std::to_string(s) + " outside 0..4");
        ++counts[static_cast<std::size_t>(s)];
    }
    std::map<std::string, Rational> out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out[kRubricLabels[i]] = Rational(counts[i], static_cast<long>(scores.size()));
    }
    return out;
}

GroupSummary aggregate(const std::vector<DecomposedScore>& scores, const std::string& key,
                       const AggregateConfig& cfg) {
    GroupSummary g;
    g.key = key;
    std::vector<Rational> ps, rs, fs;
    for (const auto& s : scores) {
        if (s.flags.count(ScoreFlag::no_elements)) ++g.no_elements;
        if (s.flags.count(ScoreFlag::no_criteria)) ++g.no_criteria;
        if (s.flags.count(ScoreFlag::no_answer)) ++g.no_answer;
        if (!cfg.include_no_elements && s.flags.count(ScoreFlag::no_elements)) {
            ++g.excluded;
            continue;
        }
        ps.push_back(s.precision);
        rs.push_back(s.recall);
        fs.push_back(s.f_beta);
    }
    if (ps.empty()) throw ScoringError(ScoringErrorKind::EmptyGroup, "group \"" + key + "\" is empty");
    g.count = ps.size();
    g.mean_precision = mean(ps);
    g.median_precision = lower_median(ps);
    g.mean_recall = mean(rs);
    g.median_recall = lower_median(rs);
    g.mean_f = mean(fs);
    g.median_f = lower_median(fs);
    return g;
}

}  // namespace dece
