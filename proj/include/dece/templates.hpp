#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dece {

/// The four decomposed-evaluation templates plus the holistic pointwise one.
/// Each maps to exactly one expected response schema.
enum class TemplateId {
    criterion_extraction,
    criterion_satisfaction,
    element_extraction,
    element_verification,
    pointwise,
};

const char* template_name(TemplateId id);
std::optional<TemplateId> template_from_name(std::string_view name);

/// Slot names the template expects, e.g. {"query", "answer"}.
const std::vector<std::string>& template_slots(TemplateId id);

/// Raw template text with {slot} placeholders.
const std::string& template_text(TemplateId id);

class MissingSlot : public std::runtime_error {
public:
    MissingSlot(TemplateId id, const std::string& slot);
    const std::string& slot() const { return slot_; }

private:
    std::string slot_;
};

/// Substitutes every required slot verbatim (no escaping). Throws MissingSlot
/// when a required slot is absent; extra slots are ignored.
std::string render_template(TemplateId id, const std::map<std::string, std::string>& slots);

/// "1: text\n2: text" rendering used to feed numbered items into the
/// {gold_criteria} and {elements} slots.
std::string numbered_list(const std::vector<std::string>& items);

}  // namespace dece
