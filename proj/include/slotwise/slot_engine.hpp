#pragma once

#include "slotwise/generator.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

// The seven slots, in the fixed invocation order.
enum class SlotName { UQ, CP, J, ROLE, TONE, FILT, FE };

inline constexpr std::size_t kSlotCount = 7;
inline constexpr std::array<SlotName, kSlotCount> kAllSlots = {
    SlotName::UQ, SlotName::CP, SlotName::J, SlotName::ROLE,
    SlotName::TONE, SlotName::FILT, SlotName::FE};

inline constexpr std::string_view kPlaceholder = "{TextInput}";

std::string_view to_string(SlotName name);
std::optional<SlotName> parse_slot_name(std::string_view text);

inline constexpr std::size_t index_of(SlotName name) {
    return static_cast<std::size_t>(name);
}

struct SlotTemplate {
    SlotName name = SlotName::UQ;
    std::string template_text;
    std::string start_tag;
    std::string end_tag;

    // Throws Error(Schema) describing the first violated invariant.
    void validate() const;

    bool operator==(const SlotTemplate&) const = default;
};

// One validated template per slot.
class TemplateSet {
public:
    // The shipped defaults.
    TemplateSet();

    // Throws Error(Schema) unless `templates` holds each slot exactly once and
    // every template validates.
    explicit TemplateSet(std::vector<SlotTemplate> templates);

    // Parses the versioned slot-template document. Errors carry the line of
    // the offending slot entry (LocatedError).
    static TemplateSet from_json_text(std::string_view text);
    static TemplateSet load_file(const std::string& path);
    // The templates shipped with the library.
    static TemplateSet defaults();

    const SlotTemplate& operator[](SlotName name) const { return slots_[index_of(name)]; }

    // Replaces one template after validating it.
    void set(SlotTemplate tmpl);

    const std::array<SlotTemplate, kSlotCount>& all() const { return slots_; }

    nlohmann::json to_json() const;
    static TemplateSet from_json(const nlohmann::json& j);

    bool operator==(const TemplateSet&) const = default;

private:
    struct Unvalidated {};
    explicit TemplateSet(Unvalidated) {}
    std::array<SlotTemplate, kSlotCount> slots_{};
};

class SlotSet {
public:
    SlotSet() = default;

    const std::string& operator[](SlotName name) const { return values_[index_of(name)]; }
    std::string& operator[](SlotName name) { return values_[index_of(name)]; }

    nlohmann::json to_json() const;
    static SlotSet from_json(const nlohmann::json& j);

    bool operator==(const SlotSet&) const = default;

private:
    std::array<std::string, kSlotCount> values_{};
};

std::string render_slot_prompt(const SlotTemplate& tmpl, std::string_view input_text);

// Text between the first start_tag and the first end_tag after it, trimmed.
// A start_tag repeated inside that span narrows it to the innermost
// well-formed span. Missing or misordered tags give "".
std::string extract_span(std::string_view output_text, std::string_view start_tag,
                         std::string_view end_tag);

struct SlotExtraction {
    SlotSet slots;
    std::vector<std::string> warnings;
};

// render -> generate -> extract_span for each slot in kAllSlots order. A failed
// generator call leaves that slot empty with a warning; if every call fails the
// last failure is rethrown.
SlotExtraction extract_all_slots(std::string_view input_text, const TemplateSet& templates,
                                 const Generator& generator);

}  // namespace slotwise
