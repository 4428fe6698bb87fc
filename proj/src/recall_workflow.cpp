#include "dece/recall_workflow.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace dece {

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

CriteriaCacheKey criteria_cache_key(const EvaluationInstance& instance) {
    return CriteriaCacheKey{
        instance.id,
        fnv1a_hex(instance.gold.required),
        fnv1a_hex(template_text(TemplateId::criterion_extraction)),
    };
}

std::vector<Criterion> CriteriaCache::get_or_extract(
    const CriteriaCacheKey& key, const std::function<std::vector<Criterion>()>& extract) {
    std::shared_future<std::vector<Criterion>> fut;
    std::shared_ptr<std::promise<std::vector<Criterion>>> prom;
    {
        std::lock_guard lk(mu_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            fut = it->second;
        } else {
            prom = std::make_shared<std::promise<std::vector<Criterion>>>();
            fut = prom->get_future().share();
            entries_.emplace(key, fut);
            ++extractions_;
        }
    }
    if (prom) {
        // winner extracts outside the lock; losers wait on the future
        try {
            prom->set_value(extract());
        } catch (...) {
            prom->set_exception(std::current_exception());
        }
    }
    return fut.get();
}

std::size_t CriteriaCache::extraction_count() const {
    std::lock_guard lk(mu_);
    return extractions_;
}

namespace {

// "12: text" / "12. text" / "12) text" -> text; anything else passes through.
std::string strip_index_prefix(const std::string& item) {
    std::size_t i = 0;
    while (i < item.size() && std::isspace(static_cast<unsigned char>(item[i]))) ++i;
    std::size_t d = i;
    while (d < item.size() && std::isdigit(static_cast<unsigned char>(item[d]))) ++d;
    if (d == i || d >= item.size()) return item.substr(i);
    const char sep = item[d];
    if (sep != ':' && sep != '.' && sep != ')') return item.substr(i);
    std::size_t t = d + 1;
    while (t < item.size() && std::isspace(static_cast<unsigned char>(item[t]))) ++t;
    return item.substr(t);
}

}  // namespace

std::vector<Criterion> parse_criteria_items(const std::vector<std::string>& items) {
    std::vector<Criterion> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        Criterion c;
        c.index = static_cast<int>(out.size()) + 1;
        c.text = strip_index_prefix(item);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Criterion> extract_criteria(const EvaluationInstance& instance, JudgeBackend& backend,
                                        const RetryPolicy& policy, TranscriptSink* transcript,
                                        RateLimiter* limiter, CriteriaCache* cache) {
    auto do_extract = [&]() -> std::vector<Criterion> {
        JudgeRequest req;
        req.template_id = TemplateId::criterion_extraction;
        // Recall criteria come from the required section only.
        req.rendered_prompt = render_template(
            TemplateId::criterion_extraction,
            {{"query", instance.query}, {"answer", instance.gold.required}});
        req.params = default_params(req.template_id, req.rendered_prompt.size());

        int asks = 0;
        for (;;) {
            JudgeResponse resp = dispatch(req, backend, policy, transcript, limiter);
            ++asks;
            const auto& payload = std::get<CriteriaPayload>(resp.parsed);
            if (!payload.items.empty()) return parse_criteria_items(payload.items);
            if (asks >= policy.max_attempts)
                throw JudgeError(JudgeErrorKind::EmptyCriteria,
                                 "judge returned zero criteria for instance " + instance.id, asks);
        }
    };

    if (!cache) return do_extract();
    return cache->get_or_extract(criteria_cache_key(instance), do_extract);
}

VerdictSet judge_satisfaction(const std::vector<Criterion>& criteria,
                              const std::string& model_answer, JudgeBackend& backend,
                              const RetryPolicy& policy, TranscriptSink* transcript,
                              RateLimiter* limiter) {
    if (criteria.empty())
        throw std::invalid_argument("judge_satisfaction: criteria must be nonempty");
    if (model_answer.empty())
        throw std::invalid_argument("judge_satisfaction: model answer must be nonempty");

    std::vector<std::string> texts;
    texts.reserve(criteria.size());
    for (const auto& c : criteria) texts.push_back(c.text);

    JudgeRequest req;
    req.template_id = TemplateId::criterion_satisfaction;
    req.rendered_prompt = render_template(
        TemplateId::criterion_satisfaction,
        {{"gold_criteria", numbered_list(texts)}, {"model_response", model_answer}});
    req.params = default_params(req.template_id, req.rendered_prompt.size());
    req.expected_items = criteria.size();

    JudgeResponse resp = dispatch(req, backend, policy, transcript, limiter);
    const auto& payload = std::get<VerdictPayload>(resp.parsed);
    return VerdictSet{VerdictTarget::criteria, payload.scores, payload.reasoning};
}

// ---------------------------------------------------------------------------
// Revisions
// ---------------------------------------------------------------------------

const char* revision_action_name(RevisionAction a) {
    switch (a) {
        case RevisionAction::keep: return "keep";
        case RevisionAction::modify: return "modify";
        case RevisionAction::discard: return "discard";
        case RevisionAction::add: return "add";
    }
    return "?";
}

std::optional<RevisionAction> revision_action_from_name(std::string_view name) {
    if (name == "keep") return RevisionAction::keep;
    if (name == "modify") return RevisionAction::modify;
    if (name == "discard") return RevisionAction::discard;
    if (name == "add") return RevisionAction::add;
    return std::nullopt;
}

RevisionSet RevisionSet::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open revision set: " + path.string());
    RevisionSet set;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("revision set line " + std::to_string(lineno) +
                                     " is not a JSON object");
        Revision r;
        r.instance_id = j.at("instance_id").get<std::string>();
        auto action = revision_action_from_name(j.at("action").get<std::string>());
        if (!action)
            throw std::runtime_error("revision set line " + std::to_string(lineno) +
                                     " has unknown action \"" +
                                     j.at("action").get<std::string>() + "\"");
        r.action = *action;
        if (j.contains("index")) r.index = j["index"].get<int>();
        if (j.contains("new_text")) r.new_text = j["new_text"].get<std::string>();
        set.by_instance[r.instance_id].push_back(std::move(r));
    }
    return set;
}

UnknownCriterionIndex::UnknownCriterionIndex(int index)
    : std::runtime_error("UnknownCriterionIndex: no criterion with index " +
                         std::to_string(index)) {}

RevisionOutcome apply_revisions(const std::vector<Criterion>& criteria,
                                const std::vector<Revision>& revisions) {
    struct Slot {
        Criterion criterion;
        bool discarded = false;
        bool modified = false;
    };
    std::vector<Slot> slots;
    slots.reserve(criteria.size());
    for (const auto& c : criteria) slots.push_back({c});

    auto slot_at = [&](std::optional<int> index) -> Slot& {
        if (!index || *index < 1 || static_cast<std::size_t>(*index) > slots.size())
            throw UnknownCriterionIndex(index.value_or(0));
        return slots[static_cast<std::size_t>(*index) - 1];
    };

    std::vector<Criterion> added;
    for (const auto& r : revisions) {
        switch (r.action) {
            case RevisionAction::keep:
                if (r.index) slot_at(r.index);  // validate the reference
                break;
            case RevisionAction::modify: {
                Slot& s = slot_at(r.index);
                if (r.new_text) s.criterion.text = *r.new_text;
                s.criterion.provenance = Provenance::expert_modified;
                s.modified = true;
                break;
            }
            case RevisionAction::discard:
                slot_at(r.index).discarded = true;
                break;
            case RevisionAction::add: {
                Criterion c;
                c.text = r.new_text.value_or("");
                c.provenance = Provenance::expert_added;
                added.push_back(std::move(c));
                break;
            }
        }
    }

    RevisionOutcome out;
    for (auto& s : slots) {
        if (s.discarded) {
            ++out.stats.discarded;
            continue;
        }
        if (s.modified) ++out.stats.modified;
        else ++out.stats.kept;
        out.criteria.push_back(std::move(s.criterion));
    }
    for (auto& c : added) {
        ++out.stats.added;
        out.criteria.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < out.criteria.size(); ++i)
        out.criteria[i].index = static_cast<int>(i) + 1;
    return out;
}

}  // namespace dece
