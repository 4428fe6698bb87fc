#include "dece/precision_workflow.hpp"

#include "dece/recall_workflow.hpp"

namespace dece {

std::vector<ElementItem> parse_element_items(const std::vector<std::string>& items) {
    std::vector<ElementItem> out;
    out.reserve(items.size());
    for (const auto& c : parse_criteria_items(items)) {
        out.push_back(ElementItem{c.index, c.text});
    }
    return out;
}

std::vector<ElementItem> extract_elements(const std::string& query,
                                          const std::string& model_answer, JudgeBackend& backend,
                                          const RetryPolicy& policy, TranscriptSink* transcript,
                                          RateLimiter* limiter) {
    if (model_answer.empty())
        throw std::invalid_argument("extract_elements: model answer must be nonempty");

    JudgeRequest req;
    req.template_id = TemplateId::element_extraction;
    req.rendered_prompt = render_template(TemplateId::element_extraction,
                                          {{"query", query}, {"answer", model_answer}});
    req.params = default_params(req.template_id, req.rendered_prompt.size());

    JudgeResponse resp = dispatch(req, backend, policy, transcript, limiter);
    return parse_element_items(std::get<ElementsPayload>(resp.parsed).items);
}

VerdictSet verify_elements(const std::vector<ElementItem>& elements, const GoldAnswer& gold,
                           JudgeBackend& backend, const RetryPolicy& policy,
                           TranscriptSink* transcript, RateLimiter* limiter) {
    if (elements.empty())
        throw std::invalid_argument("verify_elements: elements must be nonempty");

    std::vector<std::string> texts;
    texts.reserve(elements.size());
    for (const auto& e : elements) texts.push_back(e.text);

    JudgeRequest req;
    req.template_id = TemplateId::element_verification;
    req.rendered_prompt = render_template(
        TemplateId::element_verification,
        {{"gold_answer", gold.full_text()}, {"elements", numbered_list(texts)}});
    req.params = default_params(req.template_id, req.rendered_prompt.size());
    req.expected_items = elements.size();

    JudgeResponse resp = dispatch(req, backend, policy, transcript, limiter);
    const auto& payload = std::get<VerdictPayload>(resp.parsed);
    return VerdictSet{VerdictTarget::elements, payload.scores, payload.reasoning};
}

}  // namespace dece
