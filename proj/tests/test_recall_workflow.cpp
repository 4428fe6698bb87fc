#include "dece/recall_workflow.hpp"

#include "dece/scoring.hpp"
#include "judge_sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <thread>

using namespace dece;
using namespace dece::testsupport;

namespace {

RetryPolicy fast_retry() {
    RetryPolicy p;
    p.backoff_base = std::chrono::milliseconds(1);
    return p;
}

EvaluationInstance fixture_instance() {
    EvaluationInstance inst;
    inst.id = "REC-1";
    inst.query = "Which showings support an extension of time to serve?";
    inst.search_results = {"confidential retrieved document text"};
    inst.gold.required =
        "The movant must cite Rule 1.070(j).\n"
        "The standard is read expansively.\n"
        "Good cause must be shown.\n"
        "Excusable neglect is an alternative showing.\n"
        "Prejudice to the defendant matters.";
    inst.gold.helpful = "SECRET-HELPFUL-AUTHORITY should never reach the recall prompts.";
    inst.model_answers["model-a"] =
        "The movant must cite Rule 1.070(j).\nGood cause must be shown.\nNoise claim.";
    return inst;
}

}  // namespace

TEST_CASE("well-formed extraction payload parses into indexed criteria") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return json{{"gold_criterion",
                     json::array({"1: cites Rule 1.070(j)", "2: states the standard is expansive"})}}
            .dump();
    });
    EvaluationInstance inst = fixture_instance();
    auto criteria = extract_criteria(inst, judge, fast_retry());
    REQUIRE(criteria.size() == 2);
    CHECK(criteria[0].index == 1);
    CHECK(criteria[0].text == "cites Rule 1.070(j)");
    CHECK(criteria[1].index == 2);
    CHECK(criteria[1].text == "states the standard is expansive");
    CHECK(criteria[0].provenance == Provenance::llm_generated);
}

TEST_CASE("index prefix parsing tolerates colon, dot and paren forms") {
    auto parsed = parse_criteria_items({"1: colon form", "2. dot form", "3) paren form",
                                        "no prefix at all", "12:tight colon"});
    REQUIRE(parsed.size() == 5);
    CHECK(parsed[0].text == "colon form");
    CHECK(parsed[1].text == "dot form");
    CHECK(parsed[2].text == "paren form");
    CHECK(parsed[3].text == "no prefix at all");
    CHECK(parsed[4].text == "tight colon");
    for (int i = 0; i < 5; ++i) CHECK(parsed[static_cast<std::size_t>(i)].index == i + 1);
}

TEST_CASE("zero criteria is a judge failure, retried then surfaced") {
    std::atomic<int> calls{0};
    ScriptedJudge judge([&](const std::string&, const GenerationParams&) {
        ++calls;
        return R"({"gold_criterion": []})";
    });
    EvaluationInstance inst = fixture_instance();
    try {
        extract_criteria(inst, judge, fast_retry());
        FAIL("expected EmptyCriteria");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::EmptyCriteria);
        CHECK(calls.load() == 3);
    }
}

TEST_CASE("fixture gold with five enumerable requirements extracts five criteria") {
    ScriptedJudge judge(simulate);
    EvaluationInstance inst = fixture_instance();
    auto criteria = extract_criteria(inst, judge, fast_retry());
    REQUIRE(criteria.size() == 5);
    CHECK(criteria[0].text == "The movant must cite Rule 1.070(j).");
    CHECK(criteria[4].text == "Prejudice to the defendant matters.");
}

TEST_CASE("satisfaction verdicts pass through in criterion order") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return R"({"scores":[1,1,0],"reasoning":["a","b","c"]})";
    });
    std::vector<Criterion> criteria{{1, "c1", {}}, {2, "c2", {}}, {3, "c3", {}}};
    auto v = judge_satisfaction(criteria, "answer text", judge, fast_retry());
    CHECK(v.target == VerdictTarget::criteria);
    CHECK(v.scores == std::vector<int>{1, 1, 0});
}

TEST_CASE("empty inputs violate satisfaction preconditions") {
    ScriptedJudge judge(simulate);
    std::vector<Criterion> criteria{{1, "c1", {}}};
    CHECK_THROWS_AS(judge_satisfaction({}, "answer", judge), std::invalid_argument);
    CHECK_THROWS_AS(judge_satisfaction(criteria, "", judge), std::invalid_argument);
}

TEST_CASE("planted satisfaction of criteria {1,3} of 4 yields recall 1/2") {
    // the simulator satisfies a criterion iff its text appears in the answer
    EvaluationInstance inst;
    inst.id = "REC-2";
    inst.query = "q";
    inst.gold.required = "alpha rule.\nbeta rule.\ngamma rule.\ndelta rule.";
    ScriptedJudge judge(simulate);
    auto criteria = extract_criteria(inst, judge, fast_retry());
    REQUIRE(criteria.size() == 4);
    auto v = judge_satisfaction(criteria, "alpha rule.\nsomething else.\ngamma rule.", judge,
                                fast_retry());
    CHECK(v.scores == std::vector<int>{1, 0, 1, 0});
    CHECK(recall_score(v) == Rational(1, 2));
}

TEST_CASE("permuting criteria permutes verdicts and leaves recall unchanged") {
    ScriptedJudge judge(simulate);
    std::vector<Criterion> criteria{
        {1, "alpha rule.", {}}, {2, "beta rule.", {}}, {3, "gamma rule.", {}}, {4, "delta rule.", {}}};
    const std::string answer = "gamma rule.\nalpha rule.";

    auto base = judge_satisfaction(criteria, answer, judge, fast_retry());
    const Rational base_recall = recall_score(base);

    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        auto shuffled = criteria;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto v = judge_satisfaction(shuffled, answer, judge, fast_retry());
        CHECK(recall_score(v) == base_recall);
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            const bool expected = answer.find(shuffled[i].text) != std::string::npos;
            CHECK(v.scores[i] == (expected ? 1 : 0));
        }
    }
}

TEST_CASE("recall prompts never carry helpful text or search results") {
    PromptCapture capture(simulate);
    ScriptedJudge judge(capture.rule());
    EvaluationInstance inst = fixture_instance();

    auto criteria = extract_criteria(inst, judge, fast_retry());
    judge_satisfaction(criteria, inst.model_answers["model-a"], judge, fast_retry());

    const auto prompts = capture.prompts();
    REQUIRE(prompts.size() == 2);
    for (const auto& prompt : prompts) {
        CHECK(prompt.find("SECRET-HELPFUL-AUTHORITY") == std::string::npos);
        CHECK(prompt.find("confidential retrieved document") == std::string::npos);
    }
}

TEST_CASE("criteria extraction is cached per instance across models") {
    std::atomic<int> extraction_calls{0};
    ScriptedJudge judge([&](const std::string& prompt, const GenerationParams& params) {
        if (prompt.find("\"gold_criterion\"") != std::string::npos) ++extraction_calls;
        return simulate(prompt, params);
    });
    EvaluationInstance inst = fixture_instance();
    CriteriaCache cache;

    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            auto criteria = extract_criteria(inst, judge, fast_retry(), nullptr, nullptr, &cache);
            CHECK(criteria.size() == 5);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(extraction_calls.load() == 1);
    CHECK(cache.extraction_count() == 1);

    // a different gold text misses the cache
    EvaluationInstance other = fixture_instance();
    other.gold.required = "entirely different requirement.";
    extract_criteria(other, judge, fast_retry(), nullptr, nullptr, &cache);
    CHECK(cache.extraction_count() == 2);
}

// --------------------------------------------------------------------------
// Revisions
// --------------------------------------------------------------------------

namespace {

std::vector<Criterion> make_criteria(int n) {
    std::vector<Criterion> out;
    for (int i = 1; i <= n; ++i)
        out.push_back({i, "criterion " + std::to_string(i), Provenance::llm_generated});
    return out;
}

}  // namespace

TEST_CASE("empty revision set leaves criteria untouched") {
    auto criteria = make_criteria(3);
    auto outcome = apply_revisions(criteria, {});
    CHECK(outcome.criteria == criteria);
    CHECK(outcome.stats.kept == 3);
    CHECK(outcome.stats.modified == 0);
    CHECK(outcome.stats.discarded == 0);
    CHECK(outcome.stats.added == 0);
}

TEST_CASE("discarding recompacts indices") {
    auto criteria = make_criteria(3);
    Revision discard;
    discard.instance_id = "X";
    discard.action = RevisionAction::discard;
    discard.index = 2;
    auto outcome = apply_revisions(criteria, {discard});
    REQUIRE(outcome.criteria.size() == 2);
    CHECK(outcome.criteria[0].index == 1);
    CHECK(outcome.criteria[0].text == "criterion 1");
    CHECK(outcome.criteria[1].index == 2);
    CHECK(outcome.criteria[1].text == "criterion 3");
    CHECK(outcome.stats.discarded == 1);
    CHECK(outcome.stats.kept == 2);
}

TEST_CASE("modify and add set provenance") {
    auto criteria = make_criteria(2);
    Revision modify;
    modify.instance_id = "X";
    modify.action = RevisionAction::modify;
    modify.index = 1;
    modify.new_text = "tightened wording";
    Revision add;
    add.instance_id = "X";
    add.action = RevisionAction::add;
    add.new_text = "overlooked nuance";
    auto outcome = apply_revisions(criteria, {modify, add});
    REQUIRE(outcome.criteria.size() == 3);
    CHECK(outcome.criteria[0].text == "tightened wording");
    CHECK(outcome.criteria[0].provenance == Provenance::expert_modified);
    CHECK(outcome.criteria[1].provenance == Provenance::llm_generated);
    CHECK(outcome.criteria[2].text == "overlooked nuance");
    CHECK(outcome.criteria[2].provenance == Provenance::expert_added);
    CHECK(outcome.criteria[2].index == 3);
}

TEST_CASE("unknown indices are rejected") {
    auto criteria = make_criteria(2);
    Revision bad;
    bad.instance_id = "X";
    bad.action = RevisionAction::discard;
    bad.index = 5;
    CHECK_THROWS_AS(apply_revisions(criteria, {bad}), UnknownCriterionIndex);
    Revision none;
    none.instance_id = "X";
    none.action = RevisionAction::modify;  // no index at all
    CHECK_THROWS_AS(apply_revisions(criteria, {none}), UnknownCriterionIndex);
}

TEST_CASE("a planted 979-criterion revision log yields exact accounting") {
    // 979 criteria: 117 modified, 7 discarded, 20 added
    auto criteria = make_criteria(979);
    std::vector<Revision> revisions;
    for (int i = 1; i <= 117; ++i) {
        Revision r;
        r.instance_id = "ALL";
        r.action = RevisionAction::modify;
        r.index = i;
        r.new_text = "modified " + std::to_string(i);
        revisions.push_back(r);
    }
    for (int i = 118; i <= 124; ++i) {
        Revision r;
        r.instance_id = "ALL";
        r.action = RevisionAction::discard;
        r.index = i;
        revisions.push_back(r);
    }
    for (int i = 0; i < 20; ++i) {
        Revision r;
        r.instance_id = "ALL";
        r.action = RevisionAction::add;
        r.new_text = "added " + std::to_string(i);
        revisions.push_back(r);
    }
    auto outcome = apply_revisions(criteria, revisions);
    CHECK(outcome.stats.kept == 855);
    CHECK(outcome.stats.modified == 117);
    CHECK(outcome.stats.discarded == 7);
    CHECK(outcome.stats.added == 20);
    CHECK(outcome.criteria.size() == 979 - 7 + 20);

    CHECK(to_percent(Rational(855, 979)) == "87.33");
    CHECK(to_percent(Rational(117, 979)) == "11.95");
    CHECK(to_percent(Rational(7, 979)) == "0.72");
}

TEST_CASE("revision sets load from JSONL") {
    const auto path = std::filesystem::temp_directory_path() / "dece_revisions_test.jsonl";
    {
        std::ofstream out(path);
        out << R"({"instance_id":"Q-1","action":"modify","index":1,"new_text":"better"})" << "\n";
        out << R"({"instance_id":"Q-1","action":"discard","index":2})" << "\n";
        out << R"({"instance_id":"Q-2","action":"add","new_text":"fresh"})" << "\n";
    }
    auto set = RevisionSet::load_jsonl(path);
    CHECK(set.by_instance.size() == 2);
    CHECK(set.by_instance["Q-1"].size() == 2);
    CHECK(set.by_instance["Q-1"][0].action == RevisionAction::modify);
    CHECK(set.by_instance["Q-2"][0].new_text == "fresh");
    std::filesystem::remove(path);
}
