#pragma once

// Deterministic judge simulators for tests. The rules re-read the rendered
// prompt, so they exercise the real templates end to end:
//   - extraction templates: every nonempty line of the answer slot becomes one
//     item, "N: <line>"
//   - verification/satisfaction: an item scores 1 iff its text occurs verbatim
//     in the reference block (substring oracle)
//   - pointwise: score taken from a "[score:N]" marker in the model response,
//     default 2

#include "dece/judge_backend.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <string>
#include <vector>

namespace dece::testsupport {

inline std::string slot_after(const std::string& prompt, const std::string& marker) {
    const auto pos = prompt.find(marker);
    if (pos == std::string::npos) return {};
    return prompt.substr(pos + marker.size());
}

inline std::string slot_between(const std::string& prompt, const std::string& marker,
                                const std::string& terminator) {
    const auto pos = prompt.find(marker);
    if (pos == std::string::npos) return {};
    const auto start = pos + marker.size();
    const auto end = prompt.find(terminator, start);
    if (end == std::string::npos) return prompt.substr(start);
    return prompt.substr(start, end - start);
}

inline std::vector<std::string> nonempty_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        std::size_t b = 0;
        while (b < line.size() && line[b] == ' ') ++b;
        line = line.substr(b);
        if (!line.empty()) lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

// Strip the "N: " prefix the numbered_list renderer adds.
inline std::string strip_item_prefix(const std::string& line) {
    std::size_t d = 0;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d > 0 && d + 1 < line.size() && line[d] == ':' && line[d + 1] == ' ')
        return line.substr(d + 2);
    return line;
}

inline std::string items_json(const char* key, const std::vector<std::string>& lines) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < lines.size(); ++i)
        arr.push_back(std::to_string(i + 1) + ": " + lines[i]);
    return nlohmann::json{{key, arr}}.dump();
}

inline std::string verdicts_json(const std::vector<std::string>& items,
                                 const std::string& reference) {
    nlohmann::json scores = nlohmann::json::array();
    nlohmann::json reasoning = nlohmann::json::array();
    for (const auto& raw : items) {
        const std::string text = strip_item_prefix(raw);
        const bool hit = reference.find(text) != std::string::npos;
        scores.push_back(hit ? 1 : 0);
        reasoning.push_back(hit ? "stated verbatim in the reference"
                                : "not found in the reference");
    }
    return nlohmann::json{{"scores", scores}, {"reasoning", reasoning}}.dump();
}

inline int planted_pointwise_score(const std::string& model_response) {
    const auto pos = model_response.find("[score:");
    if (pos == std::string::npos) return 2;
    return model_response[pos + 7] - '0';
}

/// The full simulator rule: dispatchable for every template.
inline std::string simulate(const std::string& prompt, const GenerationParams&) {
    using nlohmann::json;
    if (prompt.find("\"gold_criterion\"") != std::string::npos) {
        const std::string answer = slot_after(prompt, "Gold standard answer: ");
        return items_json("gold_criterion", nonempty_lines(answer));
    }
    if (prompt.find("\"model_elements\"") != std::string::npos) {
        const std::string answer = slot_after(prompt, "Model answer: ");
        return items_json("model_elements", nonempty_lines(answer));
    }
    if (prompt.find("[Ideal answer criteria]: ") != std::string::npos) {
        const std::string criteria = slot_between(prompt, "[Ideal answer criteria]: ", "\n***");
        const std::string response = slot_between(prompt, "[AI-generated response]: ", "\n***");
        return verdicts_json(nonempty_lines(criteria), response);
    }
    if (prompt.find("[Elements from an AI-generated response]: ") != std::string::npos) {
        const std::string gold = slot_between(prompt, "[Gold standard answer]: ", "\n***");
        const std::string elements =
            slot_between(prompt, "[Elements from an AI-generated response]: ", "\n***");
        return verdicts_json(nonempty_lines(elements), gold);
    }
    // pointwise
    const std::string response = slot_after(prompt, "Model response: ");
    const int score = planted_pointwise_score(response);
    return json{{"reasoning", "Required content compared against the model response."},
                {"score", score},
                {"justification", "planted fixture score"}}
        .dump();
}

inline ScriptedJudge make_simulator() {
    return ScriptedJudge(simulate);
}

/// Wraps a rule and records every prompt it sees, for call-inspection tests.
class PromptCapture {
public:
    explicit PromptCapture(ScriptedJudge::Rule rule) : rule_(std::move(rule)) {}

    ScriptedJudge::Rule rule() {
        return [this](const std::string& prompt, const GenerationParams& params) {
            {
                std::lock_guard lk(mu_);
                prompts_.push_back(prompt);
            }
            return rule_(prompt, params);
        };
    }

    std::vector<std::string> prompts() const {
        std::lock_guard lk(mu_);
        return prompts_;
    }

private:
    ScriptedJudge::Rule rule_;
    mutable std::mutex mu_;
    std::vector<std::string> prompts_;
};

}  // namespace dece::testsupport
