#include "slotwise/feedback.hpp"

#include "slotwise/error.hpp"
#include "slotwise/text.hpp"

#include <algorithm>

namespace slotwise {
namespace {

constexpr std::string_view kDirectivePrefix = "User directive #";

// Parses "User directive #<n>: <intent>".
std::optional<std::pair<std::size_t, std::string>> parse_directive(std::string_view line) {
    if (!line.starts_with(kDirectivePrefix)) return std::nullopt;
    line.remove_prefix(kDirectivePrefix.size());
    const auto colon = line.find(": ");
    if (colon == 0 || colon == std::string_view::npos) return std::nullopt;
    std::size_t index = 0;
    for (const char c : line.substr(0, colon)) {
        if (c < '0' || c > '9') return std::nullopt;
        index = index * 10 + static_cast<std::size_t>(c - '0');
    }
    return std::pair{index, std::string(line.substr(colon + 2))};
}

}  // namespace

std::string extract_intent(const FeedbackInput& feedback, const Generator& generator) {
    if (feedback.kind == FeedbackInput::Kind::Rating) {
        return std::string(feedback.rating == FeedbackInput::Rating::Like ? kLikeIntent : kDislikeIntent);
    }
    const auto reply = generator.generate("Extract semantic intent from: " + feedback.text +
                                          "\nOutput: <INTENT>...</INTENT>");
    auto intent = extract_span(reply, "<INTENT>", "</INTENT>");
    if (intent.empty()) throw Error(ErrorCode::IntentUnparseable, "no <INTENT> span in the generator reply");
    // Directives are single lines.
    std::replace(intent.begin(), intent.end(), '\n', ' ');
    std::replace(intent.begin(), intent.end(), '\r', ' ');
    return intent;
}

std::string_view to_string(IntentCategory category) {
    switch (category) {
        case IntentCategory::Aversion: return "aversion";
        case IntentCategory::Stylistic: return "stylistic";
        case IntentCategory::Preference: return "preference";
    }
    return "preference";
}

SlotName target_slot(IntentCategory category) {
    switch (category) {
        case IntentCategory::Aversion: return SlotName::FILT;
        case IntentCategory::Stylistic: return SlotName::TONE;
        case IntentCategory::Preference: return SlotName::CP;
    }
    return SlotName::CP;
}

IntentCategory classify_intent(const std::string& intent, const Generator& generator) {
    const auto reply = generator.generate(
        "Classify the user intent into exactly one category: aversion (something to avoid), stylistic (how to "
        "respond), preference (personal context to remember).\nIntent: " + intent +
        "\nOutput: <CATEGORY>aversion|stylistic|preference</CATEGORY>");
    const auto label = to_lower_ascii(extract_span(reply, "<CATEGORY>", "</CATEGORY>"));
    if (label == "aversion") return IntentCategory::Aversion;
    if (label == "stylistic") return IntentCategory::Stylistic;
    if (label == "preference") return IntentCategory::Preference;
    throw Error(ErrorCode::ClassificationFailed, "unrecognized intent category \"" + label + "\"");
}

std::string directive_line(std::size_t intent_index, std::string_view intent) {
    return std::string(kDirectivePrefix) + std::to_string(intent_index) + ": " + std::string(intent);
}

std::vector<std::pair<std::size_t, std::string>> list_directives(const SlotTemplate& tmpl) {
    std::vector<std::pair<std::size_t, std::string>> out;
    for (const auto& line : split_lines(tmpl.template_text)) {
        if (auto d = parse_directive(line)) out.push_back(std::move(*d));
    }
    return out;
}

SlotTemplate append_directive(const SlotTemplate& tmpl, std::size_t intent_index, std::string_view intent,
                              std::vector<std::string>& warnings) {
    auto lines = split_lines(tmpl.template_text);

    std::size_t count = 0;
    for (const auto& line : lines) count += parse_directive(line) ? 1 : 0;
    if (count >= kMaxDirectivesPerSlot) {
        const auto oldest = std::find_if(lines.begin(), lines.end(),
                                         [](const std::string& l) { return parse_directive(l).has_value(); });
        warnings.push_back(std::string(to_string(tmpl.name)) + " directive evicted: " + *oldest);
        lines.erase(oldest);
    }

    // Directives sit right above the line that shows the output tags, so the
    // output format stays last.
    auto insert_at = lines.end();
    for (auto it = lines.begin(); it != lines.end(); ++it) {
        if (it->find(tmpl.start_tag) != std::string::npos) insert_at = it;
    }
    lines.insert(insert_at, directive_line(intent_index, intent));

    SlotTemplate updated = tmpl;
    updated.template_text = join(lines, "\n");
    updated.validate();
    return updated;
}

TemplateUpdate update_slots_from_feedback(const FeedbackInput& feedback, Session& session, const Generator& generator,
                                          const Clock& clock) {
    TemplateUpdate update;
    update.templates = session.state().current_templates;
    if (!session.state().feedback_flag) return update;

    update.timestamp = clock();
    try {
        update.intent = extract_intent(feedback, generator);
        const auto slot = feedback.kind == FeedbackInput::Kind::Rating
                              ? SlotName::TONE
                              : target_slot(classify_intent(update.intent, generator));
        const auto index = session.state().intent_log.size();
        auto templates = update.templates;
        templates.set(append_directive(templates[slot], index, update.intent, update.warnings));
        update.slot = slot;
        update.directive = directive_line(index, update.intent);
        update.templates = std::move(templates);
        update.changed = true;
    } catch (const Error& e) {
        update.warnings.push_back(std::string("feedback ignored: ") + e.what());
        update.changed = false;
        update.slot.reset();
        update.directive.clear();
        update.templates = session.state().current_templates;
    }
    session.apply_template_update(update);
    return update;
}

}  // namespace slotwise
