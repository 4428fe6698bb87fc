#include "dece/scoring.hpp"

#include <doctest.h>

#include <random>

using namespace dece;

namespace {

VerdictSet verdicts(VerdictTarget target, std::vector<int> scores) {
    VerdictSet v;
    v.target = target;
    v.reasoning.assign(scores.size(), "r");
    v.scores = std::move(scores);
    return v;
}

// brute-force count oracle, independent of the Rational machinery
long count_ones(const std::vector<int>& scores) {
    long n = 0;
    for (int s : scores) n += s == 1 ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("precision is the exact fraction of supported elements") {
    CHECK(precision_score(verdicts(VerdictTarget::elements, {1, 0, 1, 0})) == Rational(1, 2));
    CHECK(precision_score(verdicts(VerdictTarget::elements, {1, 1, 1})) == Rational(1));
    CHECK(precision_score(verdicts(VerdictTarget::elements, {1, 0, 0, 1, 0, 0, 1, 0})) ==
          Rational(3, 8));
}

TEST_CASE("recall is the exact fraction of satisfied criteria") {
    CHECK(recall_score(verdicts(VerdictTarget::criteria, {1, 1, 0, 1})) == Rational(3, 4));
    CHECK(recall_score(verdicts(VerdictTarget::criteria, {0})) == Rational(0));

    // 979 planted verdicts with 855 ones
    std::vector<int> planted(979, 0);
    for (int i = 0; i < 855; ++i) planted[static_cast<std::size_t>(i)] = 1;
    std::shuffle(planted.begin(), planted.end(), std::mt19937(3));
    CHECK(recall_score(verdicts(VerdictTarget::criteria, planted)) == Rational(855, 979));
    CHECK(to_fixed(Rational(855, 979)) == "0.8733");
}

TEST_CASE("empty or mistargeted verdict sets are rejected") {
    CHECK_THROWS_AS(precision_score(verdicts(VerdictTarget::elements, {})), ScoringError);
    CHECK_THROWS_AS(precision_score(verdicts(VerdictTarget::criteria, {1})), ScoringError);
    CHECK_THROWS_AS(recall_score(verdicts(VerdictTarget::elements, {1})), ScoringError);
}

TEST_CASE("precision and recall are permutation invariant") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> scores(20);
        for (auto& s : scores) s = coin(rng);
        auto base = precision_score(verdicts(VerdictTarget::elements, scores));
        std::shuffle(scores.begin(), scores.end(), rng);
        CHECK(precision_score(verdicts(VerdictTarget::elements, scores)) == base);
    }
}

TEST_CASE("f_beta hand-evaluated cases") {
    // p = r = x  ->  x
    for (int i = 0; i <= 10; ++i) {
        Rational x(i, 10);
        CHECK(f_beta(x, x) == x);
    }
    // p = 0.5, r = 1.0, beta = 2: 5*0.5*1 / (4*0.5 + 1) = 2.5/3
    CHECK(f_beta(Rational(1, 2), Rational(1)) == Rational(5, 6));
    CHECK(to_fixed(f_beta(Rational(1, 2), Rational(1))) == "0.8333");
    // zero numerator
    CHECK(f_beta(Rational(1), Rational(0)) == Rational(0));
    CHECK(f_beta(Rational(0), Rational(0)) == Rational(0));
    CHECK_THROWS_AS(f_beta(Rational(1, 2), Rational(1, 2), FBetaConfig{Rational(0)}),
                    std::invalid_argument);
}

TEST_CASE("f_beta at beta=1 is the harmonic mean") {
    FBetaConfig f1{Rational(1)};
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> d(1, 40);
    for (int trial = 0; trial < 100; ++trial) {
        Rational p(d(rng), 40);
        Rational r(d(rng), 40);
        CHECK(f_beta(p, r, f1) == 2 * p * r / (p + r));
    }
}

TEST_CASE("f_beta recall-weighting properties on a grid") {
    const FBetaConfig f2{Rational(2)};
    const FBetaConfig f1{Rational(1)};
    for (int i = 1; i <= 50; ++i) {
        for (int j = 1; j <= 50; ++j) {
            const Rational p(i, 50), r(j, 50);
            const Rational f = f_beta(p, r, f2);
            if (i == j) {
                CHECK(f == p);
                continue;
            }
            const Rational lo = std::min(p, r), hi = std::max(p, r);
            CHECK(f > lo);
            CHECK(f < hi);
            // closer to recall than the unweighted harmonic mean is
            const Rational h = f_beta(p, r, f1);
            CHECK(abs(f - r) < abs(h - r));
            CHECK(((r > p) == (f > h)));
        }
    }
}

TEST_CASE("f_beta is monotone in both arguments") {
    const FBetaConfig f2{Rational(2)};
    for (int i = 0; i <= 50; ++i) {
        Rational prev_p(-1), prev_r(-1);
        for (int j = 0; j <= 50; ++j) {
            const Rational fp = f_beta(Rational(j, 50), Rational(i, 50), f2);
            const Rational fr = f_beta(Rational(i, 50), Rational(j, 50), f2);
            CHECK(fp >= prev_p);
            CHECK(fr >= prev_r);
            prev_p = fp;
            prev_r = fr;
        }
    }
}

TEST_CASE("decomposed_score applies the degenerate-case rules") {
    auto s = decomposed_score(3, 8, 2, 4);
    CHECK(s.precision == Rational(3, 8));
    CHECK(s.recall == Rational(1, 2));
    CHECK(s.flags.empty());

    auto no_el = decomposed_score(0, 0, 2, 4);
    CHECK(no_el.precision == Rational(0));
    CHECK(no_el.flags.count(ScoreFlag::no_elements) == 1);

    auto no_cr = decomposed_score(1, 2, 0, 0);
    CHECK(no_cr.recall == Rational(0));
    CHECK(no_cr.flags.count(ScoreFlag::no_criteria) == 1);
}

TEST_CASE("gpa and distribution") {
    CHECK(gpa({4, 4, 4, 4}) == Rational(4));
    CHECK(score_distribution({4, 4, 4, 4})["Excellent"] == Rational(1));
    CHECK(gpa({0, 4}) == Rational(2));
    CHECK_THROWS_AS(gpa({}), ScoringError);
    CHECK_THROWS_AS(gpa({5}), ScoringError);
    CHECK_THROWS_AS(gpa({-1}), ScoringError);

    // 1000 planted scores with 713 fours
    std::vector<int> planted;
    planted.insert(planted.end(), 713, 4);
    planted.insert(planted.end(), 150, 3);
    planted.insert(planted.end(), 80, 2);
    planted.insert(planted.end(), 40, 1);
    planted.insert(planted.end(), 17, 0);
    REQUIRE(planted.size() == 1000);
    std::shuffle(planted.begin(), planted.end(), std::mt19937(9));
    auto dist = score_distribution(planted);
    CHECK(dist["Excellent"] == Rational(713, 1000));
    CHECK(to_double(dist["Excellent"]) == doctest::Approx(0.713));

    // count oracle agreement
    CHECK(dist["Good"] == Rational(count_ones(std::vector<int>(150, 1)), 1000));
}

TEST_CASE("gpa renders a 3.21-style fixture exactly") {
    // 224 planted scores summing to 719: mean 719/224 renders as 3.21
    std::vector<int> planted;
    planted.insert(planted.end(), 104, 4);
    planted.insert(planted.end(), 81, 3);
    planted.insert(planted.end(), 25, 2);
    planted.insert(planted.end(), 10, 1);
    planted.insert(planted.end(), 4, 0);
    REQUIRE(planted.size() == 224);
    long sum = 0;
    for (int s : planted) sum += s;  // count oracle
    CHECK(gpa(planted) == Rational(sum, 224));
    CHECK(gpa(planted) == Rational(719, 224));
    CHECK(to_fixed(gpa(planted), 2) == "3.21");
}

TEST_CASE("aggregate of one score is that score") {
    auto s = decomposed_score(2, 5, 9, 10);  // P = 0.4, R = 0.9
    auto g = aggregate({s}, "only");
    CHECK(g.count == 1);
    CHECK(g.mean_precision == Rational(2, 5));
    CHECK(g.median_precision == Rational(2, 5));
    CHECK(g.mean_recall == Rational(9, 10));
    CHECK(g.median_recall == g.mean_recall);
}

TEST_CASE("median uses the lower-median convention") {
    std::vector<DecomposedScore> scores;
    for (int i = 1; i <= 4; ++i) scores.push_back(decomposed_score(i, 5, 1, 1));  // P = .2 .4 .6 .8
    auto g = aggregate(scores, "even");
    CHECK(g.median_precision == Rational(2, 5));
    CHECK(g.mean_precision == Rational(1, 2));
}

TEST_CASE("aggregate matches an independent fold over a planted group") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> den(1, 12);
    std::vector<DecomposedScore> scores;
    for (int i = 0; i < 10; ++i) {
        const int e = den(rng), c = den(rng);
        const int se = std::uniform_int_distribution<int>(0, e)(rng);
        const int sc = std::uniform_int_distribution<int>(0, c)(rng);
        scores.push_back(decomposed_score(static_cast<std::size_t>(se), static_cast<std::size_t>(e),
                                          static_cast<std::size_t>(sc), static_cast<std::size_t>(c)));
    }
    auto g = aggregate(scores, "planted");

    Rational sum_p = 0, sum_r = 0, sum_f = 0;
    std::vector<Rational> ps;
    for (const auto& s : scores) {
        sum_p += s.precision;
        sum_r += s.recall;
        sum_f += s.f_beta;
        ps.push_back(s.precision);
    }
    CHECK(g.mean_precision == sum_p / 10);
    CHECK(g.mean_recall == sum_r / 10);
    CHECK(g.mean_f == sum_f / 10);
    std::sort(ps.begin(), ps.end());
    CHECK(g.median_precision == ps[4]);  // lower median of 10
}

TEST_CASE("flag tallies and the exclusion config") {
    std::vector<DecomposedScore> scores;
    scores.push_back(decomposed_score(0, 0, 1, 2));  // no_elements, P=0
    scores.push_back(decomposed_score(1, 1, 1, 2));
    auto g = aggregate(scores, "g");
    CHECK(g.no_elements == 1);
    CHECK(g.count == 2);
    CHECK(g.mean_precision == Rational(1, 2));

    AggregateConfig excl;
    excl.include_no_elements = false;
    auto g2 = aggregate(scores, "g", excl);
    CHECK(g2.count == 1);
    CHECK(g2.excluded == 1);
    CHECK(g2.mean_precision == Rational(1));

    CHECK_THROWS_AS(aggregate({}, "empty"), ScoringError);
}
