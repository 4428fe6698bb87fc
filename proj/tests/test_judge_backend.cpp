#include "dece/judge_backend.hpp"

#include "judge_sim.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

using namespace dece;

namespace {

RetryPolicy fast_retry() {
    RetryPolicy p;
    p.backoff_base = std::chrono::milliseconds(1);
    return p;
}

JudgeRequest verdict_request(std::size_t expected) {
    JudgeRequest req;
    req.template_id = TemplateId::element_verification;
    req.rendered_prompt = render_template(
        TemplateId::element_verification,
        {{"gold_answer", "The rule."}, {"elements", "1: a\n2: b"}});
    req.params = default_params(req.template_id, req.rendered_prompt.size());
    req.expected_items = expected;
    return req;
}

std::string fixture_path(const char* name) {
    return std::string(DECE_FIXTURE_DIR) + "/" + name;
}

}  // namespace

// --------------------------------------------------------------------------
// Templates
// --------------------------------------------------------------------------

TEST_CASE("render_template substitutes slots verbatim") {
    auto text = render_template(TemplateId::criterion_extraction,
                                {{"query", "QUERY-MARK"}, {"answer", "ANSWER-MARK"}});
    CHECK(text.find("Query: QUERY-MARK") != std::string::npos);
    CHECK(text.find("Gold standard answer: ANSWER-MARK") != std::string::npos);
    CHECK(text.find("{query}") == std::string::npos);
    CHECK(text.find("{answer}") == std::string::npos);
    // no escaping of slot contents
    auto raw = render_template(TemplateId::criterion_extraction,
                               {{"query", "a \"b\" \\ {c}"}, {"answer", "x"}});
    CHECK(raw.find("a \"b\" \\ {c}") != std::string::npos);
}

TEST_CASE("missing slot is an error") {
    CHECK_THROWS_AS(render_template(TemplateId::element_verification, {{"elements", "1: x"}}),
                    MissingSlot);
}

TEST_CASE("pointwise template carries the rubric levels 0-4") {
    auto text = render_template(TemplateId::pointwise, {{"query", "q"},
                                                        {"search_results", "docs"},
                                                        {"gold_answer", "gold"},
                                                        {"model_response", "resp"},
                                                        {"reference_examples", ""}});
    CHECK(text.find("Irrelevant (0)") != std::string::npos);
    CHECK(text.find("Poor (1)") != std::string::npos);
    CHECK(text.find("Fair (2)") != std::string::npos);
    CHECK(text.find("Good (3)") != std::string::npos);
    CHECK(text.find("Excellent (4)") != std::string::npos);
}

TEST_CASE("generation params follow the per-template regimes") {
    for (TemplateId id : {TemplateId::criterion_extraction, TemplateId::element_extraction}) {
        auto p = default_params(id, 400);
        CHECK(p.temperature == doctest::Approx(0.3));
        CHECK(p.top_p == doctest::Approx(1.0));
        CHECK(p.max_tokens == 100 + 1000);  // ceil(400/4) + 1000
    }
    for (TemplateId id : {TemplateId::criterion_satisfaction, TemplateId::element_verification}) {
        auto p = default_params(id, 401);
        CHECK(p.temperature == doctest::Approx(0.0));
        CHECK(p.max_tokens == 101 + 1000);  // ceil rounds up
    }
    auto p = default_params(TemplateId::pointwise, 8);
    CHECK(p.temperature == doctest::Approx(0.0));
    CHECK(p.max_tokens == 2 + 2000);
}

// --------------------------------------------------------------------------
// JSON extraction
// --------------------------------------------------------------------------

TEST_CASE("first balanced object is extracted from prose") {
    auto j = extract_json_object("noise {\"a\": {\"b\": 1}} trailing {\"c\": 2}");
    REQUIRE(j.has_value());
    CHECK((*j)["a"]["b"] == 1);
}

TEST_CASE("fenced blocks win over earlier loose braces") {
    const std::string raw = "prose {broken\n```json\n{\"scores\": [1], \"reasoning\": [\"r\"]}\n```";
    auto j = extract_json_object(raw);
    REQUIRE(j.has_value());
    CHECK((*j)["scores"][0] == 1);
}

TEST_CASE("braces inside strings do not confuse the scanner") {
    auto j = extract_json_object(R"(x {"k": "a } b { c", "n": 3})");
    REQUIRE(j.has_value());
    CHECK((*j)["k"] == "a } b { c");
}

TEST_CASE("prose-wrapped fixture parses to the fenced payload") {
    std::ifstream in(fixture_path("prose_wrapped.txt"));
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    ScriptedJudge judge([text = buf.str()](const std::string&, const GenerationParams&) {
        return text;
    });
    JudgeRequest req = verdict_request(2);
    auto resp = dispatch(req, judge, fast_retry());
    const auto& v = std::get<VerdictPayload>(resp.parsed);
    CHECK(v.scores == std::vector<int>{1, 0});
    CHECK(resp.attempts == 1);
}

// --------------------------------------------------------------------------
// Dispatch, retries, schema
// --------------------------------------------------------------------------

TEST_CASE("well-formed verdict passes through") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return R"({"scores":[1,0],"reasoning":["a","b"]})";
    });
    auto resp = dispatch(verdict_request(2), judge, fast_retry());
    const auto& v = std::get<VerdictPayload>(resp.parsed);
    CHECK(v.scores == std::vector<int>{1, 0});
    CHECK(v.reasoning == std::vector<std::string>{"a", "b"});
}

TEST_CASE("length mismatch is a SchemaError after the retry budget") {
    std::atomic<int> calls{0};
    ScriptedJudge judge([&](const std::string&, const GenerationParams&) {
        ++calls;
        return R"({"scores":[1],"reasoning":["a","b"]})";
    });
    try {
        dispatch(verdict_request(2), judge, fast_retry());
        FAIL("expected SchemaError");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::Schema);
        CHECK(e.attempts() == 3);
        CHECK(calls.load() == 3);
    }
}

TEST_CASE("expected item count is enforced") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return R"({"scores":[1],"reasoning":["a"]})";
    });
    CHECK_THROWS_AS(dispatch(verdict_request(2), judge, fast_retry()), JudgeError);
}

TEST_CASE("non-binary scores are schema violations") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return R"({"scores":[1,2],"reasoning":["a","b"]})";
    });
    try {
        dispatch(verdict_request(2), judge, fast_retry());
        FAIL("expected SchemaError");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::Schema);
    }
}

TEST_CASE("non-JSON output is a ParseError after retries") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) {
        return "I refuse to answer in JSON.";
    });
    try {
        dispatch(verdict_request(2), judge, fast_retry());
        FAIL("expected ParseError");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::Parse);
        CHECK(e.attempts() == 3);
    }
}

TEST_CASE("out-of-range pointwise score is retried then surfaced") {
    std::atomic<int> calls{0};
    ScriptedJudge judge([&](const std::string&, const GenerationParams&) {
        ++calls;
        return R"({"reasoning":"r","score":7,"justification":"j"})";
    });
    JudgeRequest req;
    req.template_id = TemplateId::pointwise;
    req.rendered_prompt = "p";
    try {
        dispatch(req, judge, fast_retry());
        FAIL("expected OutOfRangeScore");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::OutOfRange);
        CHECK(e.attempts() == 3);
        CHECK(calls.load() == 3);
    }
}

TEST_CASE("a later attempt can succeed") {
    std::atomic<int> calls{0};
    ScriptedJudge judge([&](const std::string&, const GenerationParams&) -> std::string {
        if (++calls < 3) return "garbage";
        return R"({"scores":[1,1],"reasoning":["a","b"]})";
    });
    auto resp = dispatch(verdict_request(2), judge, fast_retry());
    CHECK(resp.attempts == 3);
}

TEST_CASE("transport failures surface immediately") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) -> std::string {
        throw TransportFailure("connection refused");
    });
    try {
        dispatch(verdict_request(2), judge, fast_retry());
        FAIL("expected TransportError");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::Transport);
        CHECK(e.attempts() == 1);
    }
}

TEST_CASE("rate limiting backs off then succeeds") {
    std::atomic<int> calls{0};
    ScriptedJudge judge([&](const std::string&, const GenerationParams&) -> std::string {
        if (++calls <= 2) throw RateLimitSignal("429");
        return R"({"scores":[1,1],"reasoning":["a","b"]})";
    });
    auto resp = dispatch(verdict_request(2), judge, fast_retry());
    CHECK(resp.attempts == 1);  // backoff does not consume parse attempts
    CHECK(calls.load() == 3);
}

TEST_CASE("rate limit budget exhaustion raises RateLimited") {
    ScriptedJudge judge([](const std::string&, const GenerationParams&) -> std::string {
        throw RateLimitSignal("429");
    });
    try {
        dispatch(verdict_request(2), judge, fast_retry());
        FAIL("expected RateLimited");
    } catch (const JudgeError& e) {
        CHECK(e.kind() == JudgeErrorKind::RateLimited);
    }
}

TEST_CASE("token bucket paces acquisitions") {
    RateLimiter unlimited(0.0);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 1000; ++i) unlimited.acquire();
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(100));

    RateLimiter limited(100.0);  // one token per 10ms after the burst
    const auto t1 = std::chrono::steady_clock::now();
    for (int i = 0; i < 4; ++i) limited.acquire();
    const auto waited =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t1);
    CHECK(waited >= std::chrono::milliseconds(25));  // 3 refills after the initial token
}

// --------------------------------------------------------------------------
// Determinism and transcripts
// --------------------------------------------------------------------------

TEST_CASE("scripted backend yields byte-identical responses for identical sequences") {
    auto run_once = [] {
        ScriptedJudge judge(testsupport::simulate);
        std::vector<std::string> raws;
        for (int i = 0; i < 3; ++i) {
            JudgeRequest req;
            req.template_id = TemplateId::criterion_extraction;
            req.rendered_prompt = render_template(
                TemplateId::criterion_extraction,
                {{"query", "q" + std::to_string(i)}, {"answer", "line one\nline two"}});
            req.params = default_params(req.template_id, req.rendered_prompt.size());
            raws.push_back(dispatch(req, judge).raw_text);
        }
        return raws;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("every physical call lands in the transcript and replays") {
    std::atomic<int> calls{0};
    ScriptedJudge flaky([&](const std::string&, const GenerationParams&) -> std::string {
        if (++calls == 1) return "not json";
        return R"({"scores":[0,1],"reasoning":["a","b"]})";
    });
    TranscriptSink sink;
    auto req = verdict_request(2);
    auto resp = dispatch(req, flaky, fast_retry(), &sink);
    CHECK(resp.attempts == 2);
    CHECK(sink.size() == 2);

    auto entries = sink.snapshot();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].request_hash == entries[1].request_hash);
    CHECK(entries[0].attempts == 1);
    CHECK(entries[1].attempts == 2);

    // replay reproduces the retry sequence, including the failing first call
    TranscriptReplayBackend replay(entries);
    TranscriptSink sink2;
    auto resp2 = dispatch(req, replay, fast_retry(), &sink2);
    CHECK(resp2.attempts == 2);
    CHECK(resp2.raw_text == resp.raw_text);
}

TEST_CASE("transcript JSONL round-trips") {
    TranscriptSink sink;
    sink.record({"abcd", TemplateId::pointwise, {0.0, 1234, 1.0}, "{\"score\": 3}", 1, 17});
    const auto path = std::filesystem::temp_directory_path() / "dece_transcript_test.jsonl";
    sink.write_jsonl(path);
    auto entries = TranscriptSink::read_jsonl(path);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].request_hash == "abcd");
    CHECK(entries[0].template_id == TemplateId::pointwise);
    CHECK(entries[0].params.max_tokens == 1234);
    CHECK(entries[0].raw_text == "{\"score\": 3}");
    CHECK(entries[0].latency_ms == 17);
    std::filesystem::remove(path);
}

TEST_CASE("replay backend answers only recorded requests") {
    TranscriptReplayBackend replay(std::vector<TranscriptEntry>{});
    CHECK_THROWS_AS(replay.complete("never seen", GenerationParams{}), TransportFailure);
}

// --------------------------------------------------------------------------
// Live HTTP backend against a local server
// --------------------------------------------------------------------------

TEST_CASE("http backend speaks chat completions" * doctest::timeout(30)) {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        if (n == 1) {
            res.status = 429;
            return;
        }
        auto body = json::parse(req.body);
        CHECK(body["messages"][0]["content"] == "ping");
        CHECK(body.contains("temperature"));
        const json out{
            {"choices",
             json::array({json{{"message",
                                json{{"role", "assistant"},
                                     {"content", R"({"scores":[1],"reasoning":["ok"]})"}}}}})}};
        res.set_content(out.dump(), "application/json");
    });
    server.Get("/boom", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });

    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpJudgeConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.model = "judge-model";
    HttpJudge backend(cfg);

    JudgeRequest req;
    req.template_id = TemplateId::element_verification;
    req.rendered_prompt = "ping";
    req.expected_items = 1;
    auto resp = dispatch(req, backend, fast_retry());
    CHECK(std::get<VerdictPayload>(resp.parsed).scores == std::vector<int>{1});
    CHECK(hits.load() == 2);  // one 429, one success

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend maps failures to transport errors" * doctest::timeout(30)) {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpJudgeConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    HttpJudge backend(cfg);
    CHECK_THROWS_AS(backend.complete("x", GenerationParams{}), TransportFailure);

    server.stop();
    server_thread.join();
}
