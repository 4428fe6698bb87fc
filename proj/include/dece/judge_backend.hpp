#pragma once

#include "dece/templates.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dece {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 1024;
    double top_p = 1.0;

    bool operator==(const GenerationParams&) const = default;
};

/// Input tokens approximated as ceil(chars / 4); provider tokenizers vary and
/// this artifact does not depend on any one of them.
std::size_t approx_input_tokens(std::size_t chars);

/// Per-template defaults: verification and pointwise run at temperature 0.0,
/// extraction at 0.3; top_p 1.0 everywhere; max_tokens = approximate input
/// tokens + 1000 (2000 for pointwise).
GenerationParams default_params(TemplateId id, std::size_t prompt_chars);

struct CriteriaPayload {
    std::vector<std::string> items;  // "gold_criterion" array
};

struct ElementsPayload {
    std::vector<std::string> items;  // "model_elements" array
};

struct VerdictPayload {
    std::vector<int> scores;
    std::vector<std::string> reasoning;
};

struct PointwisePayload {
    std::string reasoning;
    int score = 0;  // 0..4
    std::string justification;
};

using JudgePayload =
    std::variant<CriteriaPayload, ElementsPayload, VerdictPayload, PointwisePayload>;

struct JudgeRequest {
    TemplateId template_id = TemplateId::criterion_extraction;
    std::string rendered_prompt;
    GenerationParams params;
    // Verification requests know how many scores they expect back.
    std::optional<std::size_t> expected_items;
};

struct JudgeResponse {
    std::string raw_text;
    JudgePayload parsed;
    int attempts = 1;  // total tries, including the successful one
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class JudgeErrorKind {
    Transport,     // network / HTTP failure
    Parse,         // no JSON object recoverable from the output
    Schema,        // valid JSON, wrong shape (retries exhausted)
    RateLimited,   // backoff budget exhausted
    OutOfRange,    // pointwise score outside 0..4 (retries exhausted)
    EmptyCriteria, // extraction returned zero criteria (retries exhausted)
};

const char* judge_error_kind_name(JudgeErrorKind k);

class JudgeError : public std::runtime_error {
public:
    JudgeError(JudgeErrorKind kind, const std::string& message, int attempts);
    JudgeErrorKind kind() const { return kind_; }
    int attempts() const { return attempts_; }

private:
    JudgeErrorKind kind_;
    int attempts_;
};

// Signals thrown by backends; dispatch translates them into retries or
// JudgeError.
class TransportFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RateLimitSignal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Single-function contract: text in, text out, plus params. Any hosted API
/// or local model adapts with a thin shim.
class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;
    virtual std::string name() const = 0;
};

/// Deterministic rule-driven backend for tests and oracle fixtures. The rule
/// must be pure; identical request sequences then yield byte-identical
/// responses.
class ScriptedJudge final : public JudgeBackend {
public:
    using Rule = std::function<std::string(const std::string& prompt, const GenerationParams&)>;

    explicit ScriptedJudge(Rule rule) : rule_(std::move(rule)) {}

    std::string complete(const std::string& prompt, const GenerationParams& params) override {
        return rule_(prompt, params);
    }
    std::string name() const override { return "scripted"; }

private:
    Rule rule_;
};

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

struct TranscriptEntry {
    std::string request_hash;
    TemplateId template_id = TemplateId::criterion_extraction;
    GenerationParams params;
    std::string raw_text;
    int attempts = 1;  // ordinal of this physical call for its request
    std::int64_t latency_ms = 0;
};

json transcript_entry_to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const json& j);

/// Append-only, thread-safe sink. One entry per physical backend call, so a
/// transcript replays retries exactly.
class TranscriptSink {
public:
    void record(TranscriptEntry e);
    std::size_t size() const;

    /// Entries in canonical order: stable-sorted by (template, request hash),
    /// preserving per-request call order.
    std::vector<TranscriptEntry> snapshot() const;

    void write_jsonl(const std::filesystem::path& path) const;
    static std::vector<TranscriptEntry> read_jsonl(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> entries_;
};

/// Replays a recorded transcript as a backend: calls are answered by the
/// recorded raw texts for the same request hash, in recorded order.
class TranscriptReplayBackend final : public JudgeBackend {
public:
    explicit TranscriptReplayBackend(std::vector<TranscriptEntry> entries);
    explicit TranscriptReplayBackend(const std::filesystem::path& path);

    std::string complete(const std::string& prompt, const GenerationParams& params) override;
    std::string name() const override { return "transcript-replay"; }

private:
    std::mutex mu_;
    std::map<std::string, std::vector<std::string>> responses_;  // hash -> raw texts
    std::map<std::string, std::size_t> cursor_;
};

// ---------------------------------------------------------------------------
// Rate limiting and retries
// ---------------------------------------------------------------------------

/// Token bucket shared across workers. qps <= 0 disables limiting.
class RateLimiter {
public:
    explicit RateLimiter(double qps = 0.0, double burst = 1.0);
    void acquire();

private:
    double qps_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

struct RetryPolicy {
    int max_attempts = 3;            // parse/schema/range failures, total tries
    int rate_limit_attempts = 5;     // backoff budget
    std::chrono::milliseconds backoff_base{1000};
    double backoff_factor = 2.0;
};

/// FNV-1a over template, params, and prompt; hex string. Keys transcripts and
/// replay.
std::string request_hash(const JudgeRequest& req);
std::string fnv1a_hex(std::string_view data);

/// First syntactically complete JSON object in raw, preferring fenced code
/// blocks. Judges often wrap JSON in prose.
std::optional<json> extract_json_object(const std::string& raw);

/// Calls the backend, extracts and schema-checks the payload for the
/// request's template, retrying per policy. Every physical call is logged to
/// the transcript when one is given.
JudgeResponse dispatch(const JudgeRequest& req, JudgeBackend& backend,
                       const RetryPolicy& policy = {}, TranscriptSink* transcript = nullptr,
                       RateLimiter* limiter = nullptr);

// ---------------------------------------------------------------------------
// Live HTTP backend (OpenAI-style chat completions)
// ---------------------------------------------------------------------------

struct HttpJudgeConfig {
    std::string endpoint;             // e.g. "http://localhost:8080"
    std::string model;
    std::string api_key;              // sent as Bearer token when nonempty
    std::string path = "/v1/chat/completions";
    int timeout_seconds = 120;
};

/// Config from DECE_JUDGE_ENDPOINT / DECE_JUDGE_MODEL / DECE_JUDGE_API_KEY.
HttpJudgeConfig http_config_from_env();

class HttpJudge final : public JudgeBackend {
public:
    explicit HttpJudge(HttpJudgeConfig config);
    std::string complete(const std::string& prompt, const GenerationParams& params) override;
    std::string name() const override { return "http:" + config_.endpoint; }

private:
    HttpJudgeConfig config_;
};

}  // namespace dece
