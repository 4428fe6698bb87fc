#include "dece/templates.hpp"

#include <array>
#include <sstream>

namespace dece {

namespace {

const std::string kCriterionExtraction = R"(You are a domain analysis expert converting a comprehensive reference answer into a structured assessment checklist.

Input:
1. A specialized domain query
2. A gold standard answer whose sections separate required content from supplementary material

Task:
Create a comprehensive checklist of evaluation criteria by:
1. Extracting every mandatory element from the required content, including:
   - key principles, requirements, and concepts
   - specific conditions, exceptions, or qualifications
   - procedural steps or chronological requirements
   - evidentiary standards or verification requirements
   - regulatory or jurisdictional elements
   - authoritative sources (cases, regulations, guidelines) and their significance
   - analytical frameworks or interpretive approaches
2. Incorporating referenced examples when the required content explicitly points to supplementary information:
   - add a criterion verifying an appropriate illustrative example is included
   - mentioning any relevant example is sufficient unless stated otherwise

Response format:

Return your response in JSON format as follows:

{
  "gold_criterion": [
    "1: [description of the first required element]",
    "2: [description of the second required element]",
    ...
  ]
}

Evaluation input:

Query: {query}

Gold standard answer: {answer}
)";

const std::string kCriterionSatisfaction = R"(You are a domain expert evaluating an AI-generated response to a specialized question. You are provided with ideal answer criteria and an AI-generated response to assess.

Input data:

[BEGIN DATA]
***
[Ideal answer criteria]: {gold_criteria}
***
[AI-generated response]: {model_response}
***
[END DATA]

Evaluation task:

Grade the AI response against each numbered criterion using binary scoring:
- Score 1: criterion is satisfied
- Score 0: criterion is not satisfied

Evaluation guidelines:
1. Content matching: the response addresses the criterion's requirements, regardless of exact wording.
2. Implicit coverage: the response implicitly captures the essential elements of the criterion.
3. Authoritative sources: when the response cites relevant authorities (cases, regulations, guidelines) with appropriate context, score as satisfied.
4. Logical equivalence: responses stated in negative versus positive form that encompass the criterion are acceptable.
5. Conservative scoring: when in doubt, assign a score of 0 (not satisfied).

For each criterion, quote the specific response statements that support your decision and provide clear reasoning.

Response format:

Provide your evaluation in JSON format only. Ensure proper escaping of quotation marks within string fields:

{
    "scores": [
        [score of 0 or 1 for the first criterion],
        [score of 0 or 1 for the second criterion],
        ...
    ],
    "reasoning": [
        "[explanation for the first criterion]",
        "[explanation for the second criterion]",
        ...
    ]
}
)";

const std::string kElementExtraction = R"(You are a domain analysis expert extracting all key elements from a model-generated response for evaluation purposes.

Input:
1. A specialized domain query
2. A model-generated answer to that query

Extraction task:

Extract and list ONLY the elements that are explicitly present in the model answer. Your job is purely extractive, not evaluative.

Critical guidelines:
- Only include information that is EXPLICITLY stated in the model answer
- Do NOT mention what is missing from the answer
- Do NOT use phrases like "no specific sources were cited" or "no conditions were provided"
- Do NOT evaluate the quality, completeness, or accuracy of the answer
- If a category has nothing to extract, simply omit it

Extraction categories, when applicable:
1. Key principles, requirements, and concepts
2. Specific conditions, exceptions, or qualifications
3. Procedural steps or chronological requirements
4. Evidentiary standards or verification requirements
5. Regulatory or jurisdictional elements
6. Authoritative sources cited (cases, regulations, guidelines) - for each source include the exact citation as written, the context in which it was cited, the proposition it supposedly supports, and any direct quote attributed to it
7. Interpretive frameworks or analytical approaches

Response format:

Return your response in JSON format as follows:

{
  "model_elements": [
    "1: [description of the first element extracted from the model answer]",
    "2: [description of the second element extracted from the model answer]",
    ...
  ]
}

Evaluation input:

Query: {query}

Model answer: {answer}
)";

const std::string kElementVerification = R"(You are a domain expert verifying whether elements taken from an AI-generated response are supported by a gold standard answer.

Input data:

[BEGIN DATA]
***
[Gold standard answer]: {gold_answer}
***
[Elements from an AI-generated response]: {elements}
***
[END DATA]

Verification task:

Grade the elements based on the gold standard answer using binary scoring:
- Score 1: element is supported by the gold standard answer
- Score 0: element is not supported by the gold standard answer

Evaluation guidelines:
1. Content alignment: the gold standard answer addresses the element's content, regardless of exact wording.
2. Implicit support: the gold standard answer implicitly captures the essential aspects of the element.
3. Authoritative validation: when the gold standard answer cites relevant authorities (cases, regulations, guidelines) that support the element, score as supported.
4. Logical equivalence: statements in negative versus positive form that encompass the element are acceptable.
5. Conservative scoring: when in doubt, assign a score of 0 (not supported).

For each element, quote the specific gold-answer statements that support your decision and provide clear reasoning.

Response format:

Provide your evaluation in JSON format only. Ensure proper escaping of quotation marks within string fields:

{
    "scores": [
        [score of 0 or 1 for the first element],
        [score of 0 or 1 for the second element],
        ...
    ],
    "reasoning": [
        "[explanation for the first element]",
        "[explanation for the second element]",
        ...
    ]
}
)";

const std::string kPointwise = R"(You are a domain expert evaluating AI-generated responses to specialized queries. Your task is to assess response quality against gold standard answers using established evaluation criteria.

Evaluation framework:

- Irrelevant (0): Completely incorrect or unrelated to the input and request.
- Poor (1): Mostly incorrect or largely fails to address the specific request.
- Fair (2): Partially correct with noticeable gaps or minor inaccuracies.
- Good (3): Correct and adequately addresses the request, but lacks some nuanced information.
- Excellent (4): Fully correct, comprehensive, and directly addresses the specific request.

Evaluation process:

Follow the structured chain-of-thought methodology below:
1. Query analysis: carefully analyze the query to understand what is being asked.
2. Ideal answer examination: examine the gold standard answer; pay special attention to which content is marked required versus merely helpful, and only penalize for missing required content.
3. Model answer review: read the model answer closely, noting how it uses citations and any ambiguous statements.
4. Comparative evaluation: against the search results and the gold standard answer, check
   (a) whether all key principles from the required content are correctly identified,
   (b) whether citations in square brackets [#] correspond to relevant paragraph IDs in the search results,
   (c) whether the information is accurate and relevant to the question,
   (d) any gaps or errors in reasoning,
   (e) that ALL required content is present - a response can only be graded Excellent if it includes all required content.
5. Issue identification: label specific problems using these labels:
   - Incorrect: contains factually inaccurate statements
   - Misattribution: cited sources do not support the statements they are meant to support
   - Missing information: lacks essential required content from the gold answer
   - Citation needed: contains statements requiring citation with none provided
   - Irrelevant: includes information unresponsive to the question
   - Wrong jurisdiction: based on rules from a different jurisdiction than specified
   - Repetitive: unnecessarily repeats the same points multiple times
6. Final grading: weigh the identified strengths and weaknesses.

Response format:

Provide your complete reasoning process followed by structured output in JSON format:

{
  "reasoning": "Detailed chain-of-thought analysis...",
  "score": [numerical grade],
  "justification": "Concise explanation for the assigned score"
}

Reference examples:

Consult the graded response examples below, when provided, to calibrate your standards across quality levels:

{reference_examples}

Evaluation input:

Query: {query}

Search results: {search_results}

Gold standard answer: {gold_answer}

Model response: {model_response}
)";

struct TemplateDef {
    const char* name;
    const std::string* text;
    std::vector<std::string> slots;
};

const std::array<TemplateDef, 5>& defs() {
    static const std::array<TemplateDef, 5> d{{
        {"criterion_extraction", &kCriterionExtraction, {"query", "answer"}},
        {"criterion_satisfaction", &kCriterionSatisfaction, {"gold_criteria", "model_response"}},
        {"element_extraction", &kElementExtraction, {"query", "answer"}},
        {"element_verification", &kElementVerification, {"gold_answer", "elements"}},
        {"pointwise",
         &kPointwise,
         {"query", "search_results", "gold_answer", "model_response", "reference_examples"}},
    }};
    return d;
}

}  // namespace

const char* template_name(TemplateId id) {
    return defs()[static_cast<std::size_t>(id)].name;
}

std::optional<TemplateId> template_from_name(std::string_view name) {
    for (std::size_t i = 0; i < defs().size(); ++i) {
        if (name == defs()[i].name) return static_cast<TemplateId>(i);
    }
    return std::nullopt;
}

const std::vector<std::string>& template_slots(TemplateId id) {
    return defs()[static_cast<std::size_t>(id)].slots;
}

const std::string& template_text(TemplateId id) {
    return *defs()[static_cast<std::size_t>(id)].text;
}

MissingSlot::MissingSlot(TemplateId id, const std::string& slot)
    : std::runtime_error(std::string("template ") + template_name(id) + " is missing slot {" +
                         slot + "}"),
      slot_(slot) {}

std::string render_template(TemplateId id, const std::map<std::string, std::string>& slots) {
    std::string out = template_text(id);
    for (const auto& slot : template_slots(id)) {
        auto it = slots.find(slot);
        if (it == slots.end()) throw MissingSlot(id, slot);
        const std::string marker = "{" + slot + "}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), it->second);
            pos += it->second.size();
        }
    }
    return out;
}

std::string numbered_list(const std::vector<std::string>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) os << "\n";
        os << (i + 1) << ": " << items[i];
    }
    return os.str();
}

}  // namespace dece
