#include "slotwise/error.hpp"
#include "slotwise/feedback.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace slotwise;
using slotwise::testing::DownBackend;
using slotwise::testing::fixed_clock;
using slotwise::testing::RecordingBackend;
using slotwise::testing::scripted;

namespace {

Session session_with_turn() {
    Session s("s", TemplateSet::defaults(), {});
    TurnRecord t;
    t.user_input_text = "hello";
    t.slot_set[SlotName::UQ] = "hello";
    t.user_prompt = "hello";
    t.system_instruction = "Role: x";
    t.response = "hi";
    t.slot_templates = s.state().current_templates;
    s.append_turn(t);
    return s;
}

nlohmann::json caffeine_script(const std::string& category) {
    return {{"Extract semantic intent from: avoid caffeine", "<INTENT>avoid caffeine-related advice</INTENT>"},
            {"Intent: avoid caffeine-related advice", "<CATEGORY>" + category + "</CATEGORY>"}};
}

}  // namespace

TEST(Directives, LineFormatAndListing) {
    EXPECT_EQ(directive_line(3, "be brief"), "User directive #3: be brief");
    std::vector<std::string> warnings;
    auto t = TemplateSet::defaults()[SlotName::TONE];
    t = append_directive(t, 0, "be brief", warnings);
    t = append_directive(t, 1, "be warm", warnings);
    const auto d = list_directives(t);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0], (std::pair<std::size_t, std::string>{0, "be brief"}));
    EXPECT_EQ(d[1], (std::pair<std::size_t, std::string>{1, "be warm"}));
    EXPECT_TRUE(warnings.empty());
    EXPECT_NO_THROW(t.validate());
}

TEST(Directives, KeepTheOutputLineLast) {
    std::vector<std::string> warnings;
    const auto t = append_directive(TemplateSet::defaults()[SlotName::FILT], 0, "no caffeine", warnings);
    const auto lines = split_lines(t.template_text);
    const auto out = std::find_if(lines.begin(), lines.end(),
                                  [&](const std::string& l) { return l.find(t.start_tag) != std::string::npos; });
    ASSERT_NE(out, lines.end());
    ASSERT_NE(out, lines.begin());
    EXPECT_EQ(*(out - 1), "User directive #0: no caffeine");
}

TEST(Directives, OldestIsEvictedAtTheCap) {
    std::vector<std::string> warnings;
    auto t = TemplateSet::defaults()[SlotName::CP];
    for (std::size_t i = 0; i < kMaxDirectivesPerSlot + 2; ++i) {
        t = append_directive(t, i, "pref " + std::to_string(i), warnings);
    }
    const auto d = list_directives(t);
    ASSERT_EQ(d.size(), kMaxDirectivesPerSlot);
    EXPECT_EQ(d.front().first, 2u);
    EXPECT_EQ(d.back().first, kMaxDirectivesPerSlot + 1);
    EXPECT_EQ(warnings.size(), 2u);
}

TEST(ExtractIntent, RatingsNeedNoGenerator) {
    DownBackend down;
    FeedbackInput like;
    like.kind = FeedbackInput::Kind::Rating;
    EXPECT_EQ(extract_intent(like, down), kLikeIntent);
    like.rating = FeedbackInput::Rating::Dislike;
    EXPECT_EQ(extract_intent(like, down), kDislikeIntent);
    EXPECT_EQ(down.calls.load(), 0);
}

TEST(ExtractIntent, MissingTagThrows) {
    const auto b = scripted({{"Extract", "nothing here"}});
    try {
        extract_intent(FeedbackInput::from_json({{"text", "x"}}), *b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IntentUnparseable);
    }
}

TEST(ClassifyIntent, MapsCategoriesToSlots) {
    EXPECT_EQ(target_slot(IntentCategory::Aversion), SlotName::FILT);
    EXPECT_EQ(target_slot(IntentCategory::Stylistic), SlotName::TONE);
    EXPECT_EQ(target_slot(IntentCategory::Preference), SlotName::CP);
    EXPECT_EQ(classify_intent("x", *scripted({{"Intent: x", "<CATEGORY> Stylistic </CATEGORY>"}})),
              IntentCategory::Stylistic);
    EXPECT_THROW(classify_intent("x", *scripted({{"Intent: x", "<CATEGORY>other</CATEGORY>"}})), Error);
}

TEST(UpdateSlots, AversionGoesToFilt) {
    auto s = session_with_turn();
    s.record_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}));
    const auto b = scripted(caffeine_script("aversion"));
    const auto u = update_slots_from_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}), s, *b,
                                              fixed_clock());
    EXPECT_TRUE(u.changed);
    EXPECT_EQ(u.slot, SlotName::FILT);
    EXPECT_EQ(u.directive, "User directive #0: avoid caffeine-related advice");
    EXPECT_NE(s.state().current_templates[SlotName::FILT].template_text.find(u.directive), std::string::npos);
    EXPECT_EQ(s.state().history.back().slot_templates, s.state().current_templates);
    EXPECT_FALSE(s.state().feedback_flag);
    for (auto slot : {SlotName::UQ, SlotName::CP, SlotName::J, SlotName::ROLE, SlotName::TONE, SlotName::FE}) {
        EXPECT_EQ(s.state().current_templates[slot], TemplateSet::defaults()[slot]);
    }
}

TEST(UpdateSlots, NoFlagIsANoOp) {
    auto s = session_with_turn();
    RecordingBackend rec(scripted(caffeine_script("aversion")));
    const auto u = update_slots_from_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}), s, rec);
    EXPECT_FALSE(u.changed);
    EXPECT_TRUE(rec.prompts().empty());
    EXPECT_EQ(s.last_sequence(), 1u);
}

TEST(UpdateSlots, FailureIsClosedAndClearsFlag) {
    auto s = session_with_turn();
    const auto before = s.state().current_templates;
    s.record_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}));
    const auto b = scripted(caffeine_script("nonsense"));
    const auto u = update_slots_from_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}), s, *b);
    EXPECT_FALSE(u.changed);
    EXPECT_FALSE(u.warnings.empty());
    EXPECT_EQ(s.state().current_templates, before);
    EXPECT_FALSE(s.state().feedback_flag);
}

TEST(UpdateSlots, RatingsTargetTone) {
    auto s = session_with_turn();
    FeedbackInput like;
    like.kind = FeedbackInput::Kind::Rating;
    s.record_feedback(like);
    DownBackend down;
    const auto u = update_slots_from_feedback(like, s, down);
    EXPECT_TRUE(u.changed);
    EXPECT_EQ(u.slot, SlotName::TONE);
    EXPECT_EQ(down.calls.load(), 0);
}

TEST(UpdateSlots, IntentIndexGrowsAcrossUpdates) {
    auto s = session_with_turn();
    FeedbackInput dislike;
    dislike.kind = FeedbackInput::Kind::Rating;
    dislike.rating = FeedbackInput::Rating::Dislike;
    DownBackend down;
    s.record_feedback(dislike);
    update_slots_from_feedback(dislike, s, down);
    s.record_feedback(dislike);
    const auto u = update_slots_from_feedback(dislike, s, down);
    EXPECT_EQ(u.directive, "User directive #1: avoid previous response style");
    EXPECT_EQ(list_directives(s.state().current_templates[SlotName::TONE]).size(), 2u);
}
