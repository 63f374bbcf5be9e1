#include "slotwise/error.hpp"
#include "slotwise/session.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace slotwise;
using slotwise::testing::read_file;
using slotwise::testing::TempDir;
using slotwise::testing::write_file;

namespace {

TurnRecord sample_turn(const std::string& text) {
    TurnRecord t;
    t.user_input_text = text;
    t.slot_set[SlotName::UQ] = text;
    t.user_prompt = text;
    t.system_instruction = "Role: well-being assistant";
    t.grounding = {{"snippet", "d1", 1.25}};
    t.agent_results = {{"SendEmail", AgentStatus::Ok, "queued x.eml"}};
    t.response = "reply to " + text;
    t.timestamp = parse_iso8601("2026-10-18T20:08:12.345Z");
    t.warnings = {"w"};
    return t;
}

TemplateUpdate sample_update(const TemplateSet& base) {
    TemplateUpdate u;
    u.changed = true;
    u.slot = SlotName::FILT;
    u.intent = "avoid caffeine";
    u.directive = "User directive #0: avoid caffeine";
    auto filt = base[SlotName::FILT];
    filt.template_text += "\nextra";
    u.templates = base;
    u.templates.set(filt);
    u.timestamp = parse_iso8601("2026-10-18T20:09:00.000Z");
    return u;
}

}  // namespace

TEST(TurnRecord, JsonRoundTrip) {
    const auto t = sample_turn("hello");
    EXPECT_EQ(TurnRecord::from_json(t.to_json()), t);
}

TEST(FeedbackInput, ParsesTextAndRating) {
    const auto text = FeedbackInput::from_json({{"text", "shorter please"}, {"target_turn_index", 2}});
    EXPECT_EQ(text.kind, FeedbackInput::Kind::Text);
    EXPECT_EQ(text.target_turn_index, 2);
    const auto rating = FeedbackInput::from_json({{"rating", "dislike"}});
    EXPECT_EQ(rating.kind, FeedbackInput::Kind::Rating);
    EXPECT_EQ(rating.rating, FeedbackInput::Rating::Dislike);
    EXPECT_EQ(FeedbackInput::from_json(rating.to_json()), rating);
    EXPECT_THROW(FeedbackInput::from_json({{"text", "  "}}), Error);
    EXPECT_THROW(FeedbackInput::from_json({{"rating", "meh"}}), Error);
    EXPECT_THROW(FeedbackInput::from_json({{"text", "x"}, {"target_turn_index", -1}}), Error);
}

TEST(Session, ReplayReproducesState) {
    TempDir dir;
    const auto log = dir / "s1.jsonl";
    Session s("s1", TemplateSet::defaults(), log);
    s.append_turn(sample_turn("one"));
    s.record_feedback(FeedbackInput::from_json({{"text", "avoid caffeine"}}));
    EXPECT_TRUE(s.state().feedback_flag);
    s.apply_template_update(sample_update(s.state().current_templates));
    s.append_turn(sample_turn("two"));

    const auto replayed = Session::replay(log, "s1", TemplateSet::defaults());
    EXPECT_EQ(replayed.state(), s.state());
    EXPECT_EQ(replayed.last_sequence(), 4u);
    EXPECT_EQ(replayed.state().to_json().dump(), s.state().to_json().dump());
    EXPECT_EQ(SessionState::from_json(s.state().to_json()), s.state());
}

TEST(Session, TemplateUpdateRewritesLatestSnapshot) {
    Session s("s", TemplateSet::defaults(), {});
    s.append_turn(sample_turn("one"));
    s.record_feedback(FeedbackInput::from_json({{"text", "x"}}));
    const auto u = sample_update(s.state().current_templates);
    s.apply_template_update(u);
    EXPECT_EQ(s.state().current_templates, u.templates);
    EXPECT_EQ(s.state().history.back().slot_templates, s.state().current_templates);
    EXPECT_FALSE(s.state().feedback_flag);
    ASSERT_EQ(s.state().intent_log.size(), 1u);
    EXPECT_EQ(s.state().intent_log[0].category, SlotName::FILT);
}

TEST(Session, FeedbackNeedsAnExistingTurn) {
    Session s("s", TemplateSet::defaults(), {});
    try {
        s.record_feedback(FeedbackInput::from_json({{"text", "x"}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
}

TEST(Session, TornFinalLineIsIgnored) {
    TempDir dir;
    const auto log = dir / "s.jsonl";
    {
        Session s("s", TemplateSet::defaults(), log);
        s.append_turn(sample_turn("one"));
        s.append_turn(sample_turn("two"));
    }
    const auto full = read_file(log);
    write_file(log, full + R"({"seq":3,"type":"tu)");
    const auto replayed = Session::replay(log, "s", TemplateSet::defaults());
    EXPECT_EQ(replayed.state().history.size(), 2u);
}

TEST(Session, CorruptMiddleLineIsAnError) {
    TempDir dir;
    const auto log = dir / "s.jsonl";
    {
        Session s("s", TemplateSet::defaults(), log);
        s.append_turn(sample_turn("one"));
    }
    write_file(log, "garbage\n" + read_file(log));
    EXPECT_THROW(Session::replay(log, "s", TemplateSet::defaults()), LocatedError);
}

TEST(Session, SequenceGapIsAnError) {
    TempDir dir;
    const auto log = dir / "s.jsonl";
    {
        Session s("s", TemplateSet::defaults(), log);
        s.append_turn(sample_turn("one"));
        s.append_turn(sample_turn("two"));
    }
    const auto content = read_file(log);
    write_file(log, content.substr(content.find('\n') + 1));
    EXPECT_THROW(Session::replay(log, "s", TemplateSet::defaults()), LocatedError);
}

TEST(Session, WriteFailureLeavesStateUntouched) {
    TempDir dir;
    write_file(dir / "blocker", "x");
    Session s("s", TemplateSet::defaults(), dir / "blocker" / "s.jsonl");
    try {
        s.append_turn(sample_turn("one"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SessionWriteError);
    }
    EXPECT_TRUE(s.state().history.empty());
    EXPECT_EQ(s.last_sequence(), 0u);
}

TEST(SessionStore, PersistsAndReloads) {
    TempDir dir;
    {
        SessionStore store(dir.path());
        auto lease = store.open("alice");
        lease->append_turn(sample_turn("hi"));
        store.open("empty");
    }
    SessionStore store(dir.path());
    EXPECT_EQ(store.replay_all(), 1u);
    EXPECT_EQ(store.ids(), std::vector<std::string>{"alice"});
    const auto snap = store.snapshot("alice");
    ASSERT_TRUE(snap.has_value());
    EXPECT_EQ(snap->history.size(), 1u);
    EXPECT_FALSE(store.snapshot("empty").has_value());
    EXPECT_FALSE(store.snapshot("nobody").has_value());
}

TEST(SessionStore, FindLoadsLazily) {
    TempDir dir;
    {
        SessionStore store(dir.path());
        store.open("bob")->append_turn(sample_turn("hi"));
    }
    SessionStore store(dir.path());
    auto lease = store.find("bob");
    ASSERT_TRUE(lease.has_value());
    EXPECT_EQ((*lease)->state().history.size(), 1u);
}

TEST(SessionStore, RejectsBadIds) {
    SessionStore store({});
    EXPECT_THROW(store.open(""), Error);
    EXPECT_THROW(store.open("../etc"), Error);
    EXPECT_THROW(store.open("a/b"), Error);
    EXPECT_THROW(store.open(std::string(200, 'a')), Error);
    EXPECT_NO_THROW(store.open("user_1.a-b"));
}
