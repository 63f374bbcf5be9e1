#include "slotwise/error.hpp"
#include "slotwise/prompt_composer.hpp"

#include <gtest/gtest.h>

using namespace slotwise;

namespace {

SlotSet slots(std::initializer_list<std::pair<SlotName, std::string>> values) {
    SlotSet s;
    for (const auto& [k, v] : values) s[k] = v;
    return s;
}

}  // namespace

TEST(ComposeUserPrompt, OnlyQueryGivesExactlyTheQuery) {
    EXPECT_EQ(compose_user_prompt(slots({{SlotName::UQ, "How can I sleep better?"}})), "How can I sleep better?");
}

TEST(ComposeUserPrompt, LabelsSectionsInTemplateOrder) {
    const auto s = slots({{SlotName::J, "Evidence-based"}, {SlotName::UQ, "Q?"}, {SlotName::CP, "Age 34"}});
    EXPECT_EQ(compose_user_prompt(s), "Query: Q?\n\nContext: Age 34\n\nGuidelines: Evidence-based");
}

TEST(ComposeUserPrompt, MultiLineValuesStartOnTheirOwnLine) {
    const auto s = slots({{SlotName::UQ, "Q?"}, {SlotName::CP, "line one\nline two"}});
    EXPECT_EQ(compose_user_prompt(s), "Query: Q?\n\nContext:\nline one\nline two");
}

TEST(ComposeUserPrompt, EmptyQueryIsRejected) {
    EXPECT_THROW(compose_user_prompt(slots({{SlotName::CP, "ctx"}})), Error);
    try {
        compose_user_prompt(SlotSet{});
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingQuery);
    }
}

TEST(ComposeSystemInstruction, DefaultsFillEmptySlots) {
    EXPECT_EQ(compose_system_instruction(SlotSet{}),
              "Role: well-being assistant\n\nTone: neutral, supportive\n\nSafety Constraints: Do not provide "
              "diagnoses or medication dosing. Advise consulting a qualified professional for high-risk issues. "
              "Avoid biased, harmful, or discriminatory content.");
}

TEST(ComposeSystemInstruction, ExamplesRenderAsPairs) {
    const auto s = slots({{SlotName::ROLE, "sleep coach"},
                          {SlotName::TONE, "friendly"},
                          {SlotName::FILT, "No medication advice."},
                          {SlotName::FE, R"([{"query": "Tips?", "response": "Keep a schedule."}])"}});
    EXPECT_EQ(compose_system_instruction(s),
              "Role: sleep coach\n\nTone: friendly\n\nSafety Constraints: No medication advice.\n\n"
              "Examples:\nQ: Tips?\nA: Keep a schedule.");
}

TEST(ComposeSystemInstruction, InvalidExamplesAreOmittedWithWarning) {
    std::vector<std::string> warnings;
    const auto s = slots({{SlotName::FE, "just some prose"}});
    const auto out = compose_system_instruction(s, CompositionTemplate::defaults_shipped(), &warnings);
    EXPECT_EQ(out.find("Examples"), std::string::npos);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(ParseExamples, AcceptsJsonAndLineFormats) {
    const auto a = parse_examples(R"([{"input": "i", "output": "o"}])");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->at(0).query, "i");
    const auto b = parse_examples("Query: one\nResponse: uno\nQ: two\nA: dos");
    ASSERT_TRUE(b);
    ASSERT_EQ(b->size(), 2u);
    EXPECT_EQ(b->at(1).response, "dos");
    EXPECT_FALSE(parse_examples("Q: dangling"));
    EXPECT_FALSE(parse_examples("[]"));
    EXPECT_FALSE(parse_examples(""));
}

TEST(CompositionTemplate, ValidatesDocuments) {
    EXPECT_THROW(CompositionTemplate::from_json_text(R"({"version": 2})"), Error);
    EXPECT_THROW(CompositionTemplate::from_json_text(
                     R"({"version": 1, "user_prompt": [{"slot": "CP", "label": "Context"}],
                         "system_instruction": [{"slot": "ROLE", "label": "Role"}]})"),
                 Error);
    EXPECT_THROW(CompositionTemplate::from_json_text(
                     R"({"version": 1, "user_prompt": [{"slot": "UQ", "label": "Query"}],
                         "system_instruction": [{"slot": "UQ", "label": "Again"}]})"),
                 Error);
    const auto labels = CompositionTemplate::defaults_shipped().labels();
    EXPECT_EQ(labels.size(), 7u);
}

TEST(Compose, IsDeterministic) {
    const auto s = slots({{SlotName::UQ, "Q?"}, {SlotName::TONE, "calm"}});
    const auto a = compose(s);
    const auto b = compose(s);
    EXPECT_EQ(a.user_prompt, b.user_prompt);
    EXPECT_EQ(a.system_instruction, b.system_instruction);
}
