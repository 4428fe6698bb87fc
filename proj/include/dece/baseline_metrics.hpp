#pragma once

#include "dece/core_model.hpp"
#include "dece/judge_backend.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace dece {

struct TokenSequence {
    std::vector<std::string> tokens;
};

/// Canonical tokenizer for both lexical metrics: lowercase (ASCII), split on
/// Unicode whitespace, strip surrounding ASCII punctuation. Frozen so scores
/// are reproducible; candidate and reference must use the same tokenizer.
TokenSequence tokenize(std::string_view text);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // either side tokenized to nothing
};

/// Sentence-level LCS over whole answers: P = LCS/|candidate|,
/// R = LCS/|reference|, F1 their harmonic mean (0 when both are 0).
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

/// Sentence-level BLEU: geometric mean of modified n-gram precisions up to
/// max_n times the brevity penalty. Orders the candidate is too short to form
/// are skipped; zero-match orders get add-one smoothing. Degenerate
/// candidates score 0.
double bleu(std::string_view candidate, const std::vector<std::string>& references,
            int max_n = 4);

/// Corpus-level BLEU: n-gram matches and lengths pooled over all pairs before
/// the geometric mean and brevity penalty.
double corpus_bleu(const std::vector<std::pair<std::string, std::vector<std::string>>>& pairs,
                   int max_n = 4);

// The seven diagnostic issue labels the pointwise judge may raise.
extern const std::array<const char*, 7> kIssueLabels;

/// Case-insensitive scan of the reasoning text for known issue labels.
std::vector<std::string> extract_issue_labels(const std::string& reasoning);

struct PointwiseResult {
    int score = 0;  // 0..4
    std::string reasoning;
    std::string justification;
    std::vector<std::string> issues;
    int attempts = 1;
};

/// Holistic 0..4 rubric judgment of one model answer, with chain-of-thought
/// reasoning and issue labels parsed from it.
PointwiseResult pointwise_judge(const EvaluationInstance& instance, const std::string& model_id,
                                JudgeBackend& backend, const RetryPolicy& policy = {},
                                TranscriptSink* transcript = nullptr,
                                RateLimiter* limiter = nullptr);

}  // namespace dece
