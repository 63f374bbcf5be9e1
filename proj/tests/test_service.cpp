#include "slotwise/error.hpp"
#include "slotwise/service.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

using namespace slotwise;
using slotwise::testing::DownBackend;
using slotwise::testing::fixed_clock;
using slotwise::testing::scripted;
using slotwise::testing::TempDir;

namespace {

nlohmann::json script() {
    return {{"Output: <UQ>", "<UQ>How do I calm down?</UQ>"},
            {"Output: <TONE>", "<TONE>gentle</TONE>"},
            {"Tone: gentle", "Try slow breathing."},
            {"Extract semantic intent from: avoid caffeine", "<INTENT>avoid caffeine-related advice</INTENT>"},
            {"Intent: avoid caffeine-related advice", "<CATEGORY>aversion</CATEGORY>"}};
}

ServiceConfig config_for(const std::filesystem::path& dir, std::shared_ptr<LlmBackend> backend) {
    ServiceConfig c;
    c.sessions_dir = dir;
    c.backend = std::move(backend);
    c.clock = fixed_clock();
    return c;
}

nlohmann::json chat(const std::string& session, const std::string& text) {
    return {{"session_id", session}, {"input_text", text}};
}

}  // namespace

TEST(Service, ChatThenSession) {
    TempDir dir;
    Service svc(config_for(dir.path(), scripted(script())));
    const auto r = svc.handle_chat(chat("alice", "I feel anxious"));
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body.at("turn_index"), 0);
    EXPECT_EQ(r.body.at("response"), "Try slow breathing.");
    EXPECT_EQ(r.body.at("user_prompt"), "How do I calm down?");
    EXPECT_EQ(r.body.at("timestamp"), "2026-10-18T20:08:12.345Z");

    const auto s = svc.get_session("alice");
    ASSERT_EQ(s.status, 200);
    EXPECT_EQ(s.body.at("history").size(), 1u);
    EXPECT_EQ(svc.get_session("bob").status, 404);
}

TEST(Service, FeedbackUpdatesFilt) {
    TempDir dir;
    Service svc(config_for(dir.path(), scripted(script())));
    svc.handle_chat(chat("alice", "I feel anxious"));
    const auto f = svc.handle_feedback({{"session_id", "alice"}, {"feedback", {{"text", "avoid caffeine"}}}});
    ASSERT_EQ(f.status, 200) << f.body.dump();
    EXPECT_EQ(f.body.at("changed"), true);
    EXPECT_EQ(f.body.at("slot"), "FILT");
    EXPECT_EQ(f.body.at("summary"), "FILT += User directive #0: avoid caffeine-related advice");

    const auto t = svc.get_templates("alice");
    ASSERT_EQ(t.status, 200);
    EXPECT_EQ(t.body.at("directives").at("FILT").size(), 1u);
    EXPECT_EQ(t.body.at("directives").at("TONE").size(), 0u);

    const auto turn2 = svc.handle_chat(chat("alice", "and now?"));
    EXPECT_NE(turn2.body.at("system_instruction").get<std::string>().find("Safety Constraints"), std::string::npos);
}

TEST(Service, ErrorMapping) {
    TempDir dir;
    Service svc(config_for(dir.path(), scripted(script())));
    EXPECT_EQ(svc.handle_chat({{"session_id", "a"}}).status, 400);
    EXPECT_EQ(svc.handle_chat({{"input_text", "x"}}).status, 400);
    EXPECT_EQ(svc.handle_chat(chat("../x", "hi")).status, 400);
    auto both = chat("a", "hi");
    both["flags"] = {{"use_rag", true}, {"use_web", true}};
    EXPECT_EQ(svc.handle_chat(both).status, 400);
    EXPECT_EQ(svc.handle_feedback({{"session_id", "ghost"}, {"text", "x"}}).status, 404);
    svc.handle_chat(chat("a", "hi"));
    EXPECT_EQ(svc.handle_feedback({{"session_id", "a"}, {"text", "x"}, {"target_turn_index", 5}}).status, 404);
    EXPECT_EQ(svc.get_eval("eval-99").status, 404);
}

TEST(Service, BackendDownIs503WithRetryAfter) {
    TempDir dir;
    Service svc(config_for(dir.path(), std::make_shared<DownBackend>()));
    const auto r = svc.handle_chat(chat("a", "hello"));
    EXPECT_EQ(r.status, 503);
    ASSERT_TRUE(r.retry_after_seconds.has_value());
    EXPECT_EQ(r.body.at("error").at("code"), "BackendUnavailable");
    EXPECT_EQ(svc.get_session("a").status, 404);
}

TEST(Service, RestartReplaysIdentically) {
    TempDir dir;
    std::string before;
    {
        Service svc(config_for(dir.path(), scripted(script())));
        svc.handle_chat(chat("alice", "I feel anxious"));
        svc.handle_feedback({{"session_id", "alice"}, {"text", "avoid caffeine"}});
        svc.handle_chat(chat("alice", "more"));
        before = svc.get_session("alice").body.dump();
    }
    Service svc(config_for(dir.path(), scripted(script())));
    EXPECT_EQ(svc.get_session("alice").body.dump(), before);
}

TEST(Service, EvalJobsRunInBackground) {
    TempDir dir;
    auto cfg = config_for(dir.path(), scripted(script()));
    cfg.eval_runner = [](const EvalConfig&) {
        MetricReport r;
        r.warnings.push_back("stub");
        return r;
    };
    Service svc(std::move(cfg));
    const auto r = svc.submit_eval({{"datasets",
                                     {{{"name", "d"}, {"path", "d.jsonl"}, {"columns", {{"domain", "lifestyle"}}}}}}, {"model", {{"kind", "scripted"}, {"script", {{" ", "x"}}}}}});
    ASSERT_EQ(r.status, 202) << r.body.dump();
    const auto id = r.body.at("job_id").get<std::string>();
    svc.join_jobs();
    const auto g = svc.get_eval(id);
    EXPECT_EQ(g.body.at("status"), "done");
    EXPECT_EQ(g.body.at("report").at("warnings")[0], "stub");
    EXPECT_EQ(svc.submit_eval({{"model", 5}}).status, 400);
}

TEST(HttpServer, ServesTheApi) {
    TempDir dir;
    Service svc(config_for(dir.path(), scripted(script())));
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    server.start();
    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/healthz");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    auto bad = client.Post("/v1/chat", "{nope", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto ok = client.Post("/v1/chat", chat("web", "hi").dump(), "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    auto session = client.Get("/v1/session/web");
    ASSERT_TRUE(session);
    EXPECT_EQ(session->body, svc.get_session("web").body.dump());
    server.stop();
}
