#include "slotwise/service.hpp"

#include "slotwise/error.hpp"
#include "slotwise/feedback.hpp"

namespace slotwise {
namespace {

using nlohmann::json;

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
    return {status, {{"error", {{"code", code}, {"message", message}}}}, std::nullopt};
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::MissingQuery:
        case ErrorCode::UnsupportedModality:
        case ErrorCode::Config:
        case ErrorCode::Schema:
            return 400;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::BackendUnavailable:
            return 503;
        case ErrorCode::ProtocolError:
            return 502;
        default:
            return 500;
    }
}

const json& require(const json& j, const char* key, json::value_t type) {
    if (!j.contains(key) || j.at(key).type() != type) {
        throw Error(ErrorCode::InvalidArgument, std::string("field \"") + key + "\" is missing or has the wrong type");
    }
    return j.at(key);
}

bool optional_bool(const json& j, const char* key) {
    if (!j.contains(key)) return false;
    if (!j.at(key).is_boolean()) throw Error(ErrorCode::InvalidArgument, std::string("field \"") + key + "\" must be a boolean");
    return j.at(key).get<bool>();
}

MediaInput parse_media(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "field \"media\" must be an object");
    MediaInput m;
    m.kind = parse_media_kind(require(j, "kind", json::value_t::string).get<std::string>());
    m.mime_type = j.value("mime_type", std::string());
    m.label = j.value("label", std::string());
    if (j.contains("data")) {
        if (!j.at("data").is_string()) throw Error(ErrorCode::InvalidArgument, "field \"media.data\" must be base64 text");
        m.payload = base64_decode(j.at("data").get<std::string>());
    }
    m.validate();
    return m;
}

}  // namespace

json chat_response_json(const TurnRecord& turn, std::size_t turn_index) {
    const auto t = turn.to_json();
    return {{"turn_index", turn_index},
            {"response", t.at("response")},
            {"slot_values", t.at("slot_set")},
            {"user_prompt", t.at("user_prompt")},
            {"system_instruction", t.at("system_instruction")},
            {"grounding", t.at("grounding")},
            {"agent_results", t.at("agent_results")},
            {"warnings", t.at("warnings")},
            {"timestamp", t.at("timestamp")}};
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      sessions_(config_.sessions_dir, config_.templates),
      pipeline_([this] {
          if (!config_.backend) throw Error(ErrorCode::Config, "service needs a backend");
          PipelineDeps deps;
          deps.backend = config_.backend.get();
          deps.composition = config_.composition;
          deps.store = config_.store.get();
          deps.search = config_.search.get();
          deps.agents = config_.agents.get();
          deps.keyword_mode = config_.keyword_mode;
          deps.clock = config_.clock ? config_.clock : Clock(now_utc);
          return deps;
      }()) {
    if (!config_.clock) config_.clock = now_utc;
    if (!config_.eval_runner) config_.eval_runner = [](const EvalConfig& c) { return run_eval(c); };
    sessions_.replay_all();
}

Service::~Service() { join_jobs(); }

ApiResponse Service::handle_chat(const json& request) {
    try {
        if (!request.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        const auto session_id = require(request, "session_id", json::value_t::string).get<std::string>();
        SessionStore::validate_id(session_id);
        UserInput input;
        if (request.contains("input_text")) {
            input.text = require(request, "input_text", json::value_t::string).get<std::string>();
        }
        if (request.contains("media") && !request.at("media").is_null()) input.media = parse_media(request.at("media"));
        if (trim(input.text).empty() && !input.media) {
            throw Error(ErrorCode::InvalidArgument, "field \"input_text\" or \"media\" is required");
        }
        const json flags_json = request.value("flags", json::object());
        if (!flags_json.is_object()) throw Error(ErrorCode::InvalidArgument, "field \"flags\" must be an object");
        const InferenceFlags flags(optional_bool(flags_json, "use_rag"), optional_bool(flags_json, "use_web"),
                                   optional_bool(flags_json, "use_agent"));

        auto lease = sessions_.open(session_id);
        const auto turn = pipeline_.run(input, *lease, flags);
        return {200, chat_response_json(turn, lease->state().history.size() - 1), std::nullopt};
    } catch (const BackendUnavailable& e) {
        auto r = error_response(503, to_string(e.code()), e.what());
        r.retry_after_seconds = config_.retry_after_seconds;
        return r;
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "Internal", e.what());
    }
}

ApiResponse Service::handle_feedback(const json& request) {
    try {
        if (!request.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        const auto session_id = require(request, "session_id", json::value_t::string).get<std::string>();
        const auto feedback = FeedbackInput::from_json(request.contains("feedback") ? request.at("feedback") : request);
        auto lease = sessions_.find(session_id);
        if (!lease) return error_response(404, "NotFound", "unknown session \"" + session_id + "\"");
        Session& session = **lease;
        session.record_feedback(feedback);
        const auto update = update_slots_from_feedback(feedback, session, *config_.backend, config_.clock);

        json body{{"session_id", session_id},
                  {"changed", update.changed},
                  {"slot", update.slot ? json(to_string(*update.slot)) : json(nullptr)},
                  {"intent", update.intent},
                  {"directive", update.directive},
                  {"warnings", update.warnings}};
        body["summary"] = update.changed ? std::string(to_string(*update.slot)) + " += " + update.directive
                                         : std::string("no change");
        return {200, body, std::nullopt};
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "Internal", e.what());
    }
}

ApiResponse Service::get_session(const std::string& session_id) {
    try {
        const auto state = sessions_.snapshot(session_id);
        if (!state) return error_response(404, "NotFound", "unknown session \"" + session_id + "\"");
        return {200, state->to_json(), std::nullopt};
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    }
}

ApiResponse Service::get_templates(const std::string& session_id) {
    try {
        const auto state = sessions_.snapshot(session_id);
        if (!state) return error_response(404, "NotFound", "unknown session \"" + session_id + "\"");
        json directives = json::object();
        for (const auto& tmpl : state->current_templates.all()) {
            json list = json::array();
            for (const auto& [index, intent] : list_directives(tmpl)) {
                list.push_back({{"intent_index", index}, {"intent", intent}});
            }
            directives[std::string(to_string(tmpl.name))] = list;
        }
        return {200,
                {{"session_id", session_id},
                 {"templates", state->current_templates.to_json()},
                 {"directives", directives}},
                std::nullopt};
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    }
}

ApiResponse Service::submit_eval(const json& request) {
    EvalConfig config;
    try {
        config = EvalConfig::from_json(request.contains("config") ? request.at("config") : request);
    } catch (const Error& e) {
        return error_response(400, to_string(e.code()), e.what());
    }
    const auto id = "eval-" + std::to_string(next_job_++);
    auto job = std::make_unique<EvalJob>();
    EvalJob* raw = job.get();
    {
        std::lock_guard lock(jobs_mutex_);
        jobs_[id] = std::move(job);
        raw->worker = std::thread([this, raw, config = std::move(config)] {
            std::string status = "done";
            std::optional<json> report;
            std::string error;
            try {
                report = config_.eval_runner(config).to_json();
            } catch (const std::exception& e) {
                status = "failed";
                error = e.what();
            }
            std::lock_guard lock(jobs_mutex_);
            raw->status = status;
            raw->report = std::move(report);
            raw->error = error;
        });
    }
    return {202, {{"job_id", id}, {"status", "running"}}, std::nullopt};
}

ApiResponse Service::get_eval(const std::string& job_id) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return error_response(404, "NotFound", "unknown eval job \"" + job_id + "\"");
    json body{{"job_id", job_id}, {"status", it->second->status}};
    if (it->second->report) body["report"] = *it->second->report;
    if (!it->second->error.empty()) body["error"] = it->second->error;
    return {200, body, std::nullopt};
}

void Service::join_jobs() {
    std::vector<std::thread*> workers;
    {
        std::lock_guard lock(jobs_mutex_);
        for (auto& [id, job] : jobs_) {
            if (job->worker.joinable()) workers.push_back(&job->worker);
        }
    }
    for (auto* w : workers) w->join();
}

}  // namespace slotwise
