#include "dece/core_model.hpp"

#include <algorithm>
#include <sstream>

namespace dece {

std::string GoldAnswer::full_text() const {
    if (helpful.empty()) return required;
    return required + "\n\n" + helpful;
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::llm_generated: return "llm_generated";
        case Provenance::expert_modified: return "expert_modified";
        case Provenance::expert_added: return "expert_added";
    }
    return "?";
}

const char* score_flag_name(ScoreFlag f) {
    switch (f) {
        case ScoreFlag::no_elements: return "no_elements";
        case ScoreFlag::no_criteria: return "no_criteria";
        case ScoreFlag::no_answer: return "no_answer";
    }
    return "?";
}

const char* validation_code_name(ValidationCode c) {
    switch (c) {
        case ValidationCode::MissingField: return "MissingField";
        case ValidationCode::EmptyRequiredInfo: return "EmptyRequiredInfo";
        case ValidationCode::DuplicateId: return "DuplicateId";
        case ValidationCode::UnknownLabel: return "UnknownLabel";
        case ValidationCode::BadType: return "BadType";
        case ValidationCode::NoModelAnswers: return "NoModelAnswers";
    }
    return "?";
}

namespace {

std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::ostringstream os;
    os << "invalid instance:";
    for (const auto& i : issues) {
        os << " [" << validation_code_name(i.code) << " " << i.field << "] " << i.message << ";";
    }
    return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

EvaluationInstance validate_instance(const json& raw, ValidationContext& ctx) {
    std::vector<ValidationIssue> issues;
    EvaluationInstance inst;

    auto missing = [&](const std::string& field) {
        issues.push_back({ValidationCode::MissingField, field, "field is required"});
    };
    auto bad_type = [&](const std::string& field, const std::string& want) {
        issues.push_back({ValidationCode::BadType, field, "expected " + want});
    };

    if (!raw.is_object()) {
        issues.push_back({ValidationCode::BadType, "", "record is not a JSON object"});
        throw ValidationError(std::move(issues));
    }

    if (!raw.contains("id")) {
        missing("id");
    } else if (!raw["id"].is_string()) {
        bad_type("id", "string");
    } else {
        inst.id = raw["id"].get<std::string>();
        if (inst.id.empty()) {
            issues.push_back({ValidationCode::MissingField, "id", "id must be nonempty"});
        } else if (ctx.id_seen(inst.id)) {
            issues.push_back({ValidationCode::DuplicateId, "id", "duplicate id \"" + inst.id + "\""});
        }
    }

    if (!raw.contains("query")) {
        missing("query");
    } else if (!raw["query"].is_string()) {
        bad_type("query", "string");
    } else {
        inst.query = raw["query"].get<std::string>();
    }

    if (raw.contains("search_results")) {
        if (!raw["search_results"].is_array()) {
            bad_type("search_results", "array of strings");
        } else {
            for (const auto& doc : raw["search_results"]) {
                if (!doc.is_string()) {
                    bad_type("search_results", "array of strings");
                    break;
                }
                inst.search_results.push_back(doc.get<std::string>());
            }
        }
    }

    if (!raw.contains("gold") || !raw["gold"].is_object()) {
        if (raw.contains("gold")) bad_type("gold", "object");
        else missing("gold");
    } else {
        const auto& gold = raw["gold"];
        if (!gold.contains("required")) {
            missing("gold.required");
        } else if (!gold["required"].is_string()) {
            bad_type("gold.required", "string");
        } else {
            inst.gold.required = gold["required"].get<std::string>();
            if (inst.gold.required.empty()) {
                issues.push_back({ValidationCode::EmptyRequiredInfo, "gold.required",
                                  "required information must be nonempty"});
            }
        }
        if (gold.contains("helpful")) {
            if (!gold["helpful"].is_string()) bad_type("gold.helpful", "string");
            else inst.gold.helpful = gold["helpful"].get<std::string>();
        }
    }

    if (!raw.contains("model_answers")) {
        missing("model_answers");
    } else if (!raw["model_answers"].is_object()) {
        bad_type("model_answers", "object of model id -> answer");
    } else {
        for (const auto& [model_id, answer] : raw["model_answers"].items()) {
            if (!answer.is_string()) {
                bad_type("model_answers." + model_id, "string");
                continue;
            }
            inst.model_answers[model_id] = answer.get<std::string>();
        }
        if (inst.model_answers.empty()) {
            issues.push_back({ValidationCode::NoModelAnswers, "model_answers",
                              "an evaluable instance needs at least one model answer"});
        }
    }

    if (raw.contains("metadata")) {
        if (!raw["metadata"].is_object()) {
            bad_type("metadata", "object");
        } else {
            const auto& md = raw["metadata"];
            auto check_label = [&](const char* field, const std::optional<std::vector<std::string>>& declared,
                                   std::optional<std::string>& out) {
                if (!md.contains(field)) return;
                if (!md[field].is_string()) {
                    bad_type(std::string("metadata.") + field, "string");
                    return;
                }
                out = md[field].get<std::string>();
                if (declared &&
                    std::find(declared->begin(), declared->end(), *out) == declared->end()) {
                    issues.push_back({ValidationCode::UnknownLabel, std::string("metadata.") + field,
                                      "label \"" + *out + "\" is not in the dataset's declared set"});
                }
            };
            check_label("jurisdiction", ctx.labels().jurisdictions, inst.metadata.jurisdiction);
            check_label("query_type", ctx.labels().query_types, inst.metadata.query_type);
            if (md.contains("extra")) {
                if (!md["extra"].is_object()) {
                    bad_type("metadata.extra", "object of string -> string");
                } else {
                    for (const auto& [k, v] : md["extra"].items()) {
                        if (!v.is_string()) {
                            bad_type("metadata.extra." + k, "string");
                            continue;
                        }
                        inst.metadata.extra[k] = v.get<std::string>();
                    }
                }
            }
        }
    }

    if (!issues.empty()) throw ValidationError(std::move(issues));
    ctx.mark_seen(inst.id);
    return inst;
}

json instance_to_json(const EvaluationInstance& inst) {
    json gold{{"required", inst.gold.required}};
    if (!inst.gold.helpful.empty()) gold["helpful"] = inst.gold.helpful;

    json md = json::object();
    if (inst.metadata.jurisdiction) md["jurisdiction"] = *inst.metadata.jurisdiction;
    if (inst.metadata.query_type) md["query_type"] = *inst.metadata.query_type;
    if (!inst.metadata.extra.empty()) md["extra"] = inst.metadata.extra;

    json out{
        {"id", inst.id},
        {"query", inst.query},
        {"search_results", inst.search_results},
        {"gold", gold},
        {"model_answers", inst.model_answers},
    };
    if (!md.empty()) out["metadata"] = md;
    return out;
}

}  // namespace dece
