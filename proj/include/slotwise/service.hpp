#pragma once

#include "slotwise/agents.hpp"
#include "slotwise/eval_harness.hpp"
#include "slotwise/grounding.hpp"
#include "slotwise/inference_pipeline.hpp"
#include "slotwise/llm_gateway.hpp"
#include "slotwise/prompt_composer.hpp"
#include "slotwise/session.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace slotwise {

struct ServiceConfig {
    std::filesystem::path sessions_dir;
    TemplateSet templates;
    CompositionTemplate composition = CompositionTemplate::defaults_shipped();
    std::shared_ptr<LlmBackend> backend;
    std::shared_ptr<DocumentStore> store;
    std::shared_ptr<SearchProvider> search;
    std::shared_ptr<AgentRegistry> agents;
    KeywordMode keyword_mode = KeywordMode::Heuristic;
    Clock clock = now_utc;
    int retry_after_seconds = 5;
    // Eval jobs run through this; defaults to run_eval(config).
    std::function<MetricReport(const EvalConfig&)> eval_runner;
};

// Transport-neutral result of one API call.
struct ApiResponse {
    int status = 200;
    nlohmann::json body;
    std::optional<int> retry_after_seconds;
};

// The HTTP API without the HTTP: every endpoint is a method taking the parsed
// request and returning status plus JSON. Holds no state beyond the session
// store and eval jobs, so a restarted service that replays the session logs
// answers GET /v1/session identically.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ApiResponse handle_chat(const nlohmann::json& request);            // POST /v1/chat
    ApiResponse handle_feedback(const nlohmann::json& request);        // POST /v1/feedback
    ApiResponse get_session(const std::string& session_id);            // GET /v1/session/{id}
    ApiResponse get_templates(const std::string& session_id);          // GET /v1/templates/{id}
    ApiResponse submit_eval(const nlohmann::json& request);            // POST /v1/eval
    ApiResponse get_eval(const std::string& job_id);                   // GET /v1/eval/{id}

    SessionStore& sessions() { return sessions_; }

    // Waits for every running eval job.
    void join_jobs();

private:
    struct EvalJob {
        std::string status = "running";
        std::optional<nlohmann::json> report;
        std::string error;
        std::thread worker;
    };

    ServiceConfig config_;
    SessionStore sessions_;
    InferencePipeline pipeline_;
    std::mutex jobs_mutex_;
    std::map<std::string, std::unique_ptr<EvalJob>> jobs_;
    std::atomic<unsigned long> next_job_{1};
};

// JSON projection of a turn as returned by POST /v1/chat.
nlohmann::json chat_response_json(const TurnRecord& turn, std::size_t turn_index);

// Binds the Service to an HTTP listener.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    // Port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void start();  // listen() on a background thread
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace slotwise
