#include "slotwise/agents.hpp"

#include "slotwise/error.hpp"
#include "slotwise/slot_engine.hpp"

#include <cerrno>
#include <cstdio>
#include <system_error>

namespace slotwise {
namespace {

constexpr std::string_view kTaskOpen = "<TASK";
constexpr std::string_view kTaskClose = "</TASK>";

bool valid_type_name(std::string_view name) {
    if (name.empty()) return false;
    for (const char c : name) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

// Parses ` type="X">` right after "<TASK"; returns the type and the offset of
// the body, or nullopt.
std::optional<std::pair<std::string, std::size_t>> parse_open_tag(std::string_view text, std::size_t pos) {
    const auto close = text.find('>', pos);
    if (close == std::string_view::npos) return std::nullopt;
    const auto attrs = text.substr(pos, close - pos);
    const auto key = attrs.find("type=\"");
    if (key == std::string_view::npos) return std::nullopt;
    const auto end = attrs.find('"', key + 6);
    if (end == std::string_view::npos) return std::nullopt;
    return std::pair{std::string(attrs.substr(key + 6, end - key - 6)), close + 1};
}

}  // namespace

void AgentTask::validate() const {
    if (!valid_type_name(task_type)) throw Error(ErrorCode::InvalidArgument, "invalid task type \"" + task_type + "\"");
    if (task_type == kSendEmail) {
        for (const char* key : {"to", "subject"}) {
            const auto it = payload.find(key);
            if (it == payload.end() || trim(it->second).empty()) {
                throw Error(ErrorCode::InvalidArgument, "SendEmail task needs a \"" + std::string(key) + "\" value");
            }
        }
    }
}

std::string_view to_string(AgentStatus status) {
    switch (status) {
        case AgentStatus::Ok: return "ok";
        case AgentStatus::Failed: return "failed";
        case AgentStatus::Skipped: return "skipped";
    }
    return "failed";
}

AgentStatus parse_agent_status(std::string_view text) {
    if (text == "ok") return AgentStatus::Ok;
    if (text == "failed") return AgentStatus::Failed;
    if (text == "skipped") return AgentStatus::Skipped;
    throw Error(ErrorCode::Schema, "unknown agent status \"" + std::string(text) + "\"");
}

std::string AgentResult::summary_line() const {
    std::string line = task_type + ": " + std::string(to_string(status));
    if (!detail.empty()) line += " (" + detail + ")";
    return line;
}

nlohmann::json to_json(const AgentResult& r) {
    return {{"task_type", r.task_type}, {"status", to_string(r.status)}, {"detail", r.detail}};
}

AgentResult agent_result_from_json(const nlohmann::json& j) {
    try {
        return {j.at("task_type").get<std::string>(), parse_agent_status(j.at("status").get<std::string>()),
                j.value("detail", std::string())};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("agent result: ") + e.what());
    }
}

TaskParse parse_task_blocks(std::string_view text) {
    TaskParse out;
    std::size_t pos = 0;
    while ((pos = text.find(kTaskOpen, pos)) != std::string_view::npos) {
        const auto open = parse_open_tag(text, pos + kTaskOpen.size());
        if (!open) {
            out.warnings.push_back("task block without a type attribute dropped");
            pos += kTaskOpen.size();
            continue;
        }
        const auto& [type, body_start] = *open;
        const auto body_end = text.find(kTaskClose, body_start);
        if (body_end == std::string_view::npos) {
            out.warnings.push_back("unterminated " + type + " task block dropped");
            break;
        }
        pos = body_end + kTaskClose.size();

        AgentTask task{type, {}};
        bool ok = true;
        for (const auto& raw : split_lines(text.substr(body_start, body_end - body_start))) {
            const auto line = trim(raw);
            if (line.empty()) continue;
            const auto colon = line.find(':');
            if (colon == std::string::npos || colon == 0) {
                out.warnings.push_back(type + " task block has a malformed line: " + line);
                ok = false;
                break;
            }
            task.payload[to_lower_ascii(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
        }
        if (!ok) continue;
        try {
            task.validate();
            out.tasks.push_back(std::move(task));
        } catch (const Error& e) {
            out.warnings.push_back(std::string("task dropped: ") + e.what());
        }
    }
    return out;
}

TaskParse identify_agent_tasks(const std::string& user_prompt, const std::string& system_instruction,
                               const Generator& generator) {
    const std::string prompt =
        "Identify actions the assistant must carry out for this request. For each action emit one block "
        "<TASK type=\"SendEmail\">to: ...\nsubject: ...</TASK>. Emit nothing when no action is requested.\n"
        "System instruction: " + system_instruction + "\nRequest: " + user_prompt;
    return parse_task_blocks(generator.generate(prompt));
}

void AgentRegistry::register_handler(std::string task_type, TaskHandler handler) {
    if (!valid_type_name(task_type)) throw Error(ErrorCode::InvalidArgument, "invalid task type \"" + task_type + "\"");
    if (!handler) throw Error(ErrorCode::InvalidArgument, "handler for " + task_type + " is empty");
    handlers_[std::move(task_type)] = std::move(handler);
}

bool AgentRegistry::has_handler(std::string_view task_type) const { return handlers_.find(task_type) != handlers_.end(); }

AgentResult AgentRegistry::execute(const AgentTask& task, const TaskContext& context) const {
    const auto it = handlers_.find(task.task_type);
    if (it == handlers_.end()) return {task.task_type, AgentStatus::Skipped, "no handler"};
    try {
        auto result = it->second(task, context);
        result.task_type = task.task_type;
        return result;
    } catch (const std::exception& e) {
        return {task.task_type, AgentStatus::Failed, e.what()};
    }
}

AgentResult execute_task(const AgentTask& task, const TaskContext& context, const AgentRegistry& registry) {
    return registry.execute(task, context);
}

EmailOutbox::EmailOutbox(std::filesystem::path directory, Clock clock)
    : directory_(std::move(directory)), clock_(std::move(clock)) {}

std::filesystem::path EmailOutbox::write(const std::string& to, const std::string& subject, const std::string& body) {
    std::filesystem::create_directories(directory_);
    const auto stamp = format_compact_utc(clock_());
    for (;;) {
        const auto n = counter_.fetch_add(1);
        auto path = directory_ / (stamp + "-" + std::to_string(n) + ".eml");
        std::FILE* f = std::fopen(path.c_str(), "wx");
        if (!f) {
            if (errno == EEXIST) continue;
            throw std::system_error(errno, std::generic_category(), "cannot create " + path.string());
        }
        const std::string content = "To: " + to + "\nSubject: " + subject + "\n\n" + body;
        const bool written = std::fwrite(content.data(), 1, content.size(), f) == content.size();
        const bool closed = std::fclose(f) == 0;
        if (!written || !closed) {
            const int err = errno;
            std::filesystem::remove(path);
            throw std::system_error(err, std::generic_category(), "cannot write " + path.string());
        }
        return path;
    }
}

std::string generate_email_content(const AgentTask& task, const TaskContext& context) {
    if (const auto it = task.payload.find("body"); it != task.payload.end() && !it->second.empty()) return it->second;
    if (!context.generator) throw Error(ErrorCode::InvalidArgument, "no generator to draft the email body");
    std::string evidence;
    for (const auto& s : context.snippets) evidence += "- " + s.text + "\n";
    const std::string prompt = "Write the body of an email.\nTo: " + task.payload.at("to") +
                               "\nSubject: " + task.payload.at("subject") + "\nRequest: " + context.user_prompt +
                               "\nEvidence:\n" + evidence + "Output: <EMAIL>...</EMAIL>";
    const auto reply = context.generator->generate(prompt);
    auto body = extract_span(reply, "<EMAIL>", "</EMAIL>");
    return body.empty() ? trim(reply) : body;
}

TaskHandler make_email_handler(std::shared_ptr<EmailOutbox> outbox) {
    if (!outbox) throw Error(ErrorCode::InvalidArgument, "email handler needs an outbox");
    return [outbox](const AgentTask& task, const TaskContext& context) {
        task.validate();
        const auto body = generate_email_content(task, context);
        const auto path = outbox->write(task.payload.at("to"), task.payload.at("subject"), body);
        return AgentResult{task.task_type, AgentStatus::Ok, "queued " + path.filename().string()};
    };
}

}  // namespace slotwise
