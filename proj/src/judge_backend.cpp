#include "dece/judge_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace dece {

// ---------------------------------------------------------------------------
// Params
// ---------------------------------------------------------------------------

std::size_t approx_input_tokens(std::size_t chars) {
    return (chars + 3) / 4;
}

GenerationParams default_params(TemplateId id, std::size_t prompt_chars) {
    GenerationParams p;
    const bool extraction =
        id == TemplateId::criterion_extraction || id == TemplateId::element_extraction;
    p.temperature = extraction ? 0.3 : 0.0;
    const int headroom = id == TemplateId::pointwise ? 2000 : 1000;
    p.max_tokens = static_cast<int>(approx_input_tokens(prompt_chars)) + headroom;
    p.top_p = 1.0;
    return p;
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

const char* judge_error_kind_name(JudgeErrorKind k) {
    switch (k) {
        case JudgeErrorKind::Transport: return "TransportError";
        case JudgeErrorKind::Parse: return "ParseError";
        case JudgeErrorKind::Schema: return "SchemaError";
        case JudgeErrorKind::RateLimited: return "RateLimited";
        case JudgeErrorKind::OutOfRange: return "OutOfRangeScore";
        case JudgeErrorKind::EmptyCriteria: return "EmptyCriteria";
    }
    return "?";
}

JudgeError::JudgeError(JudgeErrorKind kind, const std::string& message, int attempts)
    : std::runtime_error(std::string(judge_error_kind_name(kind)) + ": " + message +
                         " (attempts=" + std::to_string(attempts) + ")"),
      kind_(kind),
      attempts_(attempts) {}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string request_hash(const JudgeRequest& req) {
    // Hash covers params and prompt only, so a replay backend can recompute it
    // from what a backend sees. The rendered prompt pins the template anyway.
    std::ostringstream os;
    os << req.params.temperature << "|" << req.params.max_tokens << "|" << req.params.top_p
       << "|" << req.rendered_prompt;
    return fnv1a_hex(os.str());
}

// ---------------------------------------------------------------------------
// JSON extraction
// ---------------------------------------------------------------------------

namespace {

// First balanced {...} substring that parses as a JSON object, starting the
// scan at `from`.
std::optional<json> first_object_in(const std::string& text, std::size_t from = 0) {
    for (std::size_t start = text.find('{', from); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    json parsed = json::parse(text.substr(start, i - start + 1), nullptr,
                                              /*allow_exceptions=*/false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;  // balanced but unparseable; try the next '{'
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<json> extract_json_object(const std::string& raw) {
    // Fenced code blocks win over loose braces in prose.
    std::size_t pos = 0;
    while ((pos = raw.find("```", pos)) != std::string::npos) {
        const std::size_t body_start = pos + 3;
        const std::size_t end = raw.find("```", body_start);
        if (end == std::string::npos) break;
        std::string block = raw.substr(body_start, end - body_start);
        if (auto obj = first_object_in(block)) return obj;
        pos = end + 3;
    }
    return first_object_in(raw);
}

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

namespace {

struct SchemaViolation {
    JudgeErrorKind kind;
    std::string message;
};

std::vector<std::string> string_array(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaViolation{JudgeErrorKind::Schema, std::string("missing \"") + key + "\" array"};
    if (!j[key].is_array()) throw SchemaViolation{JudgeErrorKind::Schema, std::string("\"") + key + "\" is not an array"};
    std::vector<std::string> out;
    for (const auto& item : j[key]) {
        if (!item.is_string())
            throw SchemaViolation{JudgeErrorKind::Schema, std::string("\"") + key + "\" holds a non-string item"};
        out.push_back(item.get<std::string>());
    }
    return out;
}

VerdictPayload parse_verdict(const json& j, std::optional<std::size_t> expected) {
    VerdictPayload v;
    if (!j.contains("scores") || !j["scores"].is_array())
        throw SchemaViolation{JudgeErrorKind::Schema, "missing \"scores\" array"};
    for (const auto& s : j["scores"]) {
        if (!s.is_number_integer())
            throw SchemaViolation{JudgeErrorKind::Schema, "score is not an integer"};
        const int val = s.get<int>();
        if (val != 0 && val != 1)
            throw SchemaViolation{JudgeErrorKind::Schema,
                                  "score " + std::to_string(val) + " is not binary"};
        v.scores.push_back(val);
    }
    v.reasoning = string_array(j, "reasoning");
    if (v.scores.size() != v.reasoning.size())
        throw SchemaViolation{JudgeErrorKind::Schema,
                              "scores and reasoning lengths differ (" +
                                  std::to_string(v.scores.size()) + " vs " +
                                  std::to_string(v.reasoning.size()) + ")"};
    if (expected && v.scores.size() != *expected)
        throw SchemaViolation{JudgeErrorKind::Schema,
                              "expected " + std::to_string(*expected) + " scores, got " +
                                  std::to_string(v.scores.size())};
    return v;
}

PointwisePayload parse_pointwise(const json& j) {
    PointwisePayload p;
    if (!j.contains("score") || !j["score"].is_number_integer())
        throw SchemaViolation{JudgeErrorKind::Schema, "missing integer \"score\""};
    p.score = j["score"].get<int>();
    if (p.score < 0 || p.score > 4)
        throw SchemaViolation{JudgeErrorKind::OutOfRange,
                              "pointwise score " + std::to_string(p.score) + " outside 0..4"};
    // Judges reliably emit the score but sometimes trim the prose fields.
    p.reasoning = j.value("reasoning", std::string{});
    p.justification = j.value("justification", std::string{});
    return p;
}

JudgePayload parse_payload(TemplateId id, const json& j, std::optional<std::size_t> expected) {
    switch (id) {
        case TemplateId::criterion_extraction:
            return CriteriaPayload{string_array(j, "gold_criterion")};
        case TemplateId::element_extraction:
            return ElementsPayload{string_array(j, "model_elements")};
        case TemplateId::criterion_satisfaction:
        case TemplateId::element_verification:
            return parse_verdict(j, expected);
        case TemplateId::pointwise:
            return parse_pointwise(j);
    }
    throw SchemaViolation{JudgeErrorKind::Schema, "unknown template"};
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

JudgeResponse dispatch(const JudgeRequest& req, JudgeBackend& backend, const RetryPolicy& policy,
                       TranscriptSink* transcript, RateLimiter* limiter) {
    const std::string hash = request_hash(req);
    int tries = 0;
    int rate_limit_tries = 0;
    JudgeErrorKind last_kind = JudgeErrorKind::Parse;
    std::string last_message = "no attempt made";

    while (tries < policy.max_attempts) {
        if (limiter) limiter->acquire();

        std::string raw;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            raw = backend.complete(req.rendered_prompt, req.params);
        } catch (const RateLimitSignal& e) {
            ++rate_limit_tries;
            if (rate_limit_tries >= policy.rate_limit_attempts)
                throw JudgeError(JudgeErrorKind::RateLimited, e.what(), tries + rate_limit_tries);
            const auto delay = std::chrono::duration_cast<std::chrono::milliseconds>(
                policy.backoff_base * std::pow(policy.backoff_factor, rate_limit_tries - 1));
            std::this_thread::sleep_for(delay);
            continue;  // backoff does not consume a parse attempt
        } catch (const TransportFailure& e) {
            throw JudgeError(JudgeErrorKind::Transport, e.what(), tries + 1);
        }
        ++tries;
        const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        if (transcript)
            transcript->record({hash, req.template_id, req.params, raw, tries, latency});

        auto obj = extract_json_object(raw);
        if (!obj) {
            last_kind = JudgeErrorKind::Parse;
            last_message = "no JSON object found in judge output";
            continue;
        }
        try {
            JudgePayload payload = parse_payload(req.template_id, *obj, req.expected_items);
            return JudgeResponse{std::move(raw), std::move(payload), tries};
        } catch (const SchemaViolation& v) {
            last_kind = v.kind;
            last_message = v.message;
        }
    }
    throw JudgeError(last_kind, last_message, tries);
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

json transcript_entry_to_json(const TranscriptEntry& e) {
    return json{
        {"request_hash", e.request_hash},
        {"template_id", template_name(e.template_id)},
        {"params",
         {{"temperature", e.params.temperature},
          {"max_tokens", e.params.max_tokens},
          {"top_p", e.params.top_p}}},
        {"raw_text", e.raw_text},
        {"attempts", e.attempts},
        {"latency_ms", e.latency_ms},
    };
}

TranscriptEntry transcript_entry_from_json(const json& j) {
    TranscriptEntry e;
    e.request_hash = j.at("request_hash").get<std::string>();
    if (auto id = template_from_name(j.at("template_id").get<std::string>())) e.template_id = *id;
    const auto& p = j.at("params");
    e.params.temperature = p.at("temperature").get<double>();
    e.params.max_tokens = p.at("max_tokens").get<int>();
    e.params.top_p = p.at("top_p").get<double>();
    e.raw_text = j.at("raw_text").get<std::string>();
    e.attempts = j.value("attempts", 1);
    e.latency_ms = j.value("latency_ms", std::int64_t{0});
    return e;
}

void TranscriptSink::record(TranscriptEntry e) {
    std::lock_guard lk(mu_);
    entries_.push_back(std::move(e));
}

std::size_t TranscriptSink::size() const {
    std::lock_guard lk(mu_);
    return entries_.size();
}

std::vector<TranscriptEntry> TranscriptSink::snapshot() const {
    std::vector<TranscriptEntry> copy;
    {
        std::lock_guard lk(mu_);
        copy = entries_;
    }
    std::stable_sort(copy.begin(), copy.end(), [](const TranscriptEntry& a, const TranscriptEntry& b) {
        const auto ta = static_cast<int>(a.template_id);
        const auto tb = static_cast<int>(b.template_id);
        return std::tie(ta, a.request_hash) < std::tie(tb, b.request_hash);
    });
    return copy;
}

void TranscriptSink::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open transcript for writing: " + path.string());
    for (const auto& e : snapshot()) out << transcript_entry_to_json(e).dump() << "\n";
}

std::vector<TranscriptEntry> TranscriptSink::read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transcript: " + path.string());
    std::vector<TranscriptEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        entries.push_back(transcript_entry_from_json(json::parse(line)));
    }
    return entries;
}

TranscriptReplayBackend::TranscriptReplayBackend(std::vector<TranscriptEntry> entries) {
    for (auto& e : entries) responses_[e.request_hash].push_back(std::move(e.raw_text));
}

TranscriptReplayBackend::TranscriptReplayBackend(const std::filesystem::path& path)
    : TranscriptReplayBackend(TranscriptSink::read_jsonl(path)) {}

std::string TranscriptReplayBackend::complete(const std::string& prompt,
                                              const GenerationParams& params) {
    JudgeRequest probe;
    probe.rendered_prompt = prompt;
    probe.params = params;
    const std::string hash = request_hash(probe);

    std::lock_guard lk(mu_);
    auto it = responses_.find(hash);
    if (it == responses_.end() || it->second.empty())
        throw TransportFailure("transcript has no response for request " + hash);
    std::size_t& cur = cursor_[hash];
    const std::string& text = it->second[std::min(cur, it->second.size() - 1)];
    ++cur;  // past the end, keep replaying the final recorded response
    return text;
}

// ---------------------------------------------------------------------------
// Rate limiter
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(double qps, double burst)
    : qps_(qps), burst_(std::max(burst, 1.0)), tokens_(burst_), last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (qps_ <= 0) return;
    std::unique_lock lk(mu_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        tokens_ = std::min(burst_, tokens_ + elapsed * qps_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait = (1.0 - tokens_) / qps_;
        lk.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        lk.lock();
    }
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

HttpJudgeConfig http_config_from_env() {
    HttpJudgeConfig cfg;
    if (const char* v = std::getenv("DECE_JUDGE_ENDPOINT")) cfg.endpoint = v;
    if (const char* v = std::getenv("DECE_JUDGE_MODEL")) cfg.model = v;
    if (const char* v = std::getenv("DECE_JUDGE_API_KEY")) cfg.api_key = v;
    return cfg;
}

HttpJudge::HttpJudge(HttpJudgeConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw std::invalid_argument("HttpJudge needs an endpoint (set DECE_JUDGE_ENDPOINT)");
}

std::string HttpJudge::complete(const std::string& prompt, const GenerationParams& params) {
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const json body{
        {"model", config_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", params.temperature},
        {"max_tokens", params.max_tokens},
        {"top_p", params.top_p},
    };

    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw TransportFailure("http error: " + httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimitSignal("judge endpoint returned 429");
    if (res->status < 200 || res->status >= 300)
        throw TransportFailure("judge endpoint returned status " + std::to_string(res->status));

    const json envelope = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (envelope.is_discarded() || !envelope.contains("choices") || envelope["choices"].empty())
        throw TransportFailure("judge endpoint returned a malformed completion envelope");
    const auto& first = envelope["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string())
        throw TransportFailure("judge endpoint returned a completion without content");
    return first["message"]["content"].get<std::string>();
}

}  // namespace dece
