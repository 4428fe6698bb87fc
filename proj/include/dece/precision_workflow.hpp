#pragma once

#include "dece/core_model.hpp"
#include "dece/judge_backend.hpp"

#include <string>
#include <vector>

namespace dece {

/// Strips "N:" style prefixes and renumbers 1..l by position.
std::vector<ElementItem> parse_element_items(const std::vector<std::string>& items);

/// Decomposes a model answer into atomic claims. Zero elements is legal (a
/// degenerate answer) and surfaces downstream as the no_elements flag.
std::vector<ElementItem> extract_elements(const std::string& query,
                                          const std::string& model_answer, JudgeBackend& backend,
                                          const RetryPolicy& policy = {},
                                          TranscriptSink* transcript = nullptr,
                                          RateLimiter* limiter = nullptr);

/// One binary score per element, verified against the full gold answer
/// (required plus helpful).
VerdictSet verify_elements(const std::vector<ElementItem>& elements, const GoldAnswer& gold,
                           JudgeBackend& backend, const RetryPolicy& policy = {},
                           TranscriptSink* transcript = nullptr, RateLimiter* limiter = nullptr);

}  // namespace dece
