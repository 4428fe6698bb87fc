#include "dece/baseline_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

namespace dece {

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

namespace {

bool is_unicode_space(std::uint32_t cp) {
    if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v')
        return true;
    switch (cp) {
        case 0x00A0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Minimal UTF-8 decode; invalid bytes pass through as single code units so
// tokenization never fails on binary junk.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
    const unsigned char c = s[i];
    std::size_t extra = 0;
    std::uint32_t cp = c;
    if (c >= 0xF0) { extra = 3; cp = c & 0x07; }
    else if (c >= 0xE0) { extra = 2; cp = c & 0x0F; }
    else if (c >= 0xC0) { extra = 1; cp = c & 0x1F; }
    if (i + extra >= s.size()) { ++i; return c; }
    for (std::size_t k = 1; k <= extra; ++k) {
        const unsigned char cont = s[i + k];
        if ((cont & 0xC0) != 0x80) { ++i; return c; }
        cp = (cp << 6) | (cont & 0x3F);
    }
    i += extra + 1;
    return cp;
}

void strip_punct(std::string& tok) {
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0, e = tok.size();
    while (b < e && is_punct(tok[b])) ++b;
    while (e > b && is_punct(tok[e - 1])) --e;
    tok = tok.substr(b, e - b);
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
    TokenSequence seq;
    std::string current;
    std::size_t i = 0;
    auto flush = [&]() {
        strip_punct(current);
        if (!current.empty()) seq.tokens.push_back(current);
        current.clear();
    };
    while (i < text.size()) {
        const std::size_t start = i;
        const std::uint32_t cp = decode_utf8(text, i);
        if (is_unicode_space(cp)) {
            flush();
            continue;
        }
        for (std::size_t k = start; k < i; ++k) {
            char c = text[k];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            current.push_back(c);
        }
    }
    flush();
    return seq;
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

namespace {

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    const auto cand = tokenize(candidate).tokens;
    const auto ref = tokenize(reference).tokens;
    RougeScore s;
    if (cand.empty() || ref.empty()) {
        s.degenerate = true;
        return s;
    }
    const double lcs = static_cast<double>(lcs_length(cand, ref));
    s.precision = lcs / static_cast<double>(cand.size());
    s.recall = lcs / static_cast<double>(ref.size());
    if (s.precision + s.recall > 0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        const auto from = tokens.begin() + static_cast<std::ptrdiff_t>(i);
        ++counts[std::vector<std::string>(from, from + n)];
    }
    return counts;
}

}  // namespace

namespace {

struct OrderTally {
    long matched = 0;
    long total = 0;
};

// Clipped n-gram matches of one candidate against the per-gram max across
// references, accumulated into tallies[n-1].
void tally_pair(const std::vector<std::string>& cand,
                const std::vector<std::vector<std::string>>& refs, int max_n,
                std::vector<OrderTally>& tallies) {
    for (int n = 1; n <= max_n; ++n) {
        const NgramCounts cand_counts = ngram_counts(cand, n);
        NgramCounts max_ref;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : ngram_counts(ref, n)) {
                long& slot = max_ref[gram];
                slot = std::max(slot, count);
            }
        }
        auto& tally = tallies[static_cast<std::size_t>(n - 1)];
        for (const auto& [gram, count] : cand_counts) {
            tally.total += count;
            auto it = max_ref.find(gram);
            if (it != max_ref.end()) tally.matched += std::min(count, it->second);
        }
    }
}

// Closest reference length, preferring the shorter on ties.
long closest_ref_length(long cand_len, const std::vector<std::vector<std::string>>& refs) {
    long best = static_cast<long>(refs[0].size());
    for (const auto& ref : refs) {
        const long len = static_cast<long>(ref.size());
        if (std::abs(len - cand_len) < std::abs(best - cand_len) ||
            (std::abs(len - cand_len) == std::abs(best - cand_len) && len < best))
            best = len;
    }
    return best;
}

double bleu_from_tallies(const std::vector<OrderTally>& tallies, long cand_len, long ref_len) {
    double log_sum = 0.0;
    int orders = 0;
    for (const auto& tally : tallies) {
        if (tally.total == 0) continue;  // candidate too short to form this order
        // add-one smoothing only when an order matched nothing
        const double p = tally.matched > 0
                             ? static_cast<double>(tally.matched) / static_cast<double>(tally.total)
                             : 1.0 / static_cast<double>(tally.total + 1);
        log_sum += std::log(p);
        ++orders;
    }
    if (orders == 0) return 0.0;
    const double geo = std::exp(log_sum / static_cast<double>(orders));
    const double bp = cand_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * geo;
}

std::vector<std::vector<std::string>> tokenize_refs(const std::vector<std::string>& references) {
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) {
        auto toks = tokenize(r).tokens;
        if (!toks.empty()) refs.push_back(std::move(toks));
    }
    return refs;
}

}  // namespace

double bleu(std::string_view candidate, const std::vector<std::string>& references, int max_n) {
    const auto cand = tokenize(candidate).tokens;
    if (cand.empty() || max_n < 1) return 0.0;
    const auto refs = tokenize_refs(references);
    if (refs.empty()) return 0.0;

    std::vector<OrderTally> tallies(static_cast<std::size_t>(max_n));
    tally_pair(cand, refs, max_n, tallies);
    return bleu_from_tallies(tallies, static_cast<long>(cand.size()),
                             closest_ref_length(static_cast<long>(cand.size()), refs));
}

double corpus_bleu(const std::vector<std::pair<std::string, std::vector<std::string>>>& pairs,
                   int max_n) {
    if (max_n < 1) return 0.0;
    std::vector<OrderTally> tallies(static_cast<std::size_t>(max_n));
    long cand_len = 0;
    long ref_len = 0;
    for (const auto& [candidate, references] : pairs) {
        const auto cand = tokenize(candidate).tokens;
        if (cand.empty()) continue;
        const auto refs = tokenize_refs(references);
        if (refs.empty()) continue;
        tally_pair(cand, refs, max_n, tallies);
        cand_len += static_cast<long>(cand.size());
        ref_len += closest_ref_length(static_cast<long>(cand.size()), refs);
    }
    if (cand_len == 0) return 0.0;
    return bleu_from_tallies(tallies, cand_len, ref_len);
}

// ---------------------------------------------------------------------------
// Pointwise judge
// ---------------------------------------------------------------------------

const std::array<const char*, 7> kIssueLabels{
    "Incorrect",        "Misattribution",    "Missing information", "Citation needed",
    "Irrelevant",       "Wrong jurisdiction", "Repetitive",
};

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::vector<std::string> extract_issue_labels(const std::string& reasoning) {
    const std::string haystack = lowercase(reasoning);
    std::vector<std::string> found;
    for (const char* label : kIssueLabels) {
        if (haystack.find(lowercase(label)) != std::string::npos) found.emplace_back(label);
    }
    return found;
}

PointwiseResult pointwise_judge(const EvaluationInstance& instance, const std::string& model_id,
                                JudgeBackend& backend, const RetryPolicy& policy,
                                TranscriptSink* transcript, RateLimiter* limiter) {
    auto it = instance.model_answers.find(model_id);
    if (it == instance.model_answers.end())
        throw std::invalid_argument("pointwise_judge: instance " + instance.id +
                                    " has no answer for model " + model_id);

    std::ostringstream docs;
    for (std::size_t i = 0; i < instance.search_results.size(); ++i) {
        if (i > 0) docs << "\n\n";
        docs << "[" << (i + 1) << "] " << instance.search_results[i];
    }

    std::string examples;
    if (auto ex = instance.metadata.extra.find("reference_examples");
        ex != instance.metadata.extra.end())
        examples = ex->second;

    JudgeRequest req;
    req.template_id = TemplateId::pointwise;
    req.rendered_prompt = render_template(TemplateId::pointwise, {
                                                                     {"query", instance.query},
                                                                     {"search_results", docs.str()},
                                                                     {"gold_answer", instance.gold.full_text()},
                                                                     {"model_response", it->second},
                                                                     {"reference_examples", examples},
                                                                 });
    req.params = default_params(req.template_id, req.rendered_prompt.size());

    JudgeResponse resp = dispatch(req, backend, policy, transcript, limiter);
    const auto& payload = std::get<PointwisePayload>(resp.parsed);

    PointwiseResult result;
    result.score = payload.score;
    result.reasoning = payload.reasoning;
    result.justification = payload.justification;
    result.issues = extract_issue_labels(payload.reasoning);
    result.attempts = resp.attempts;
    return result;
}

}  // namespace dece
