#pragma once

#include "slotwise/slot_engine.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slotwise {

// Section labels, ordering and fallback values for both composed prompts.
struct CompositionTemplate {
    struct Section {
        SlotName slot;
        std::string label;
    };

    int version = 1;
    std::vector<Section> user_sections;
    std::vector<Section> system_sections;
    std::string separator = "\n\n";
    // Only ROLE, TONE and FILT may carry defaults.
    std::map<SlotName, std::string> defaults;

    static CompositionTemplate from_json_text(std::string_view text);
    static CompositionTemplate load_file(const std::string& path);
    static CompositionTemplate defaults_shipped();

    // Every label in either prompt; used to detect composed text downstream.
    std::vector<std::string> labels() const;
};

struct ComposedPrompt {
    std::string user_prompt;
    std::string system_instruction;
    std::vector<std::string> warnings;
};

struct ExamplePair {
    std::string query;
    std::string response;
};

// Accepts a JSON array of {"query","response"} (or {"input","output"}) objects,
// or alternating "Query:"/"Response:" (also "Q:"/"A:") lines. nullopt when the
// text is neither.
std::optional<std::vector<ExamplePair>> parse_examples(std::string_view text);

// Throws Error(MissingQuery) when UQ is empty. With CP and J both empty the
// result is exactly the UQ text.
std::string compose_user_prompt(const SlotSet& slots,
                                const CompositionTemplate& tmpl = CompositionTemplate::defaults_shipped());

// Never empty: ROLE, TONE and FILT fall back to the template defaults. Invalid
// FE is omitted and reported through `warnings` when given.
std::string compose_system_instruction(const SlotSet& slots,
                                       const CompositionTemplate& tmpl = CompositionTemplate::defaults_shipped(),
                                       std::vector<std::string>* warnings = nullptr);

ComposedPrompt compose(const SlotSet& slots,
                       const CompositionTemplate& tmpl = CompositionTemplate::defaults_shipped());

}  // namespace slotwise
