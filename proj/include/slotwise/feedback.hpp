#pragma once

#include "slotwise/generator.hpp"
#include "slotwise/session.hpp"
#include "slotwise/slot_engine.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slotwise {

inline constexpr std::string_view kLikeIntent = "reinforce previous response style";
inline constexpr std::string_view kDislikeIntent = "avoid previous response style";
inline constexpr std::size_t kMaxDirectivesPerSlot = 20;

// Text feedback: asks the generator for the <INTENT> span. Ratings map to
// fixed intents without a generator call. Throws Error(IntentUnparseable).
std::string extract_intent(const FeedbackInput& feedback, const Generator& generator);

enum class IntentCategory { Aversion, Stylistic, Preference };

std::string_view to_string(IntentCategory category);
// aversion -> FILT, stylistic -> TONE, preference -> CP
SlotName target_slot(IntentCategory category);

// Closed three-label classification through <CATEGORY> tags. Throws
// Error(ClassificationFailed) on anything else.
IntentCategory classify_intent(const std::string& intent, const Generator& generator);

// "User directive #<index>: <intent>"
std::string directive_line(std::size_t intent_index, std::string_view intent);

// (intent index, intent text) of every directive line in a template.
std::vector<std::pair<std::size_t, std::string>> list_directives(const SlotTemplate& tmpl);

// Appends a directive line to the template body. When the slot already holds
// kMaxDirectivesPerSlot directives the oldest is removed and a warning added.
SlotTemplate append_directive(const SlotTemplate& tmpl, std::size_t intent_index, std::string_view intent,
                              std::vector<std::string>& warnings);

// Algorithm: guard on feedback_flag, extract intent, classify (ratings go to
// TONE directly), append the directive to that slot's template, persist.
// Fail-closed: any parse or classification failure leaves the templates as
// they were, still clearing the flag. Without the flag set this is a no-op
// that returns changed == false and writes nothing.
TemplateUpdate update_slots_from_feedback(const FeedbackInput& feedback, Session& session,
                                          const Generator& generator, const Clock& clock = now_utc);

}  // namespace slotwise
