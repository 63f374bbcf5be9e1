#pragma once

#include "slotwise/generator.hpp"
#include "slotwise/grounding.hpp"
#include "slotwise/text.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

inline constexpr std::string_view kSendEmail = "SendEmail";

struct AgentTask {
    std::string task_type;
    std::map<std::string, std::string> payload;

    // Throws Error(InvalidArgument).
    void validate() const;

    bool operator==(const AgentTask&) const = default;
};

enum class AgentStatus { Ok, Failed, Skipped };

std::string_view to_string(AgentStatus status);
AgentStatus parse_agent_status(std::string_view text);

struct AgentResult {
    std::string task_type;
    AgentStatus status = AgentStatus::Ok;
    std::string detail;

    // "SendEmail: ok (queued 20261018T200812000Z-0.eml)"
    std::string summary_line() const;

    bool operator==(const AgentResult&) const = default;
};

nlohmann::json to_json(const AgentResult& r);
AgentResult agent_result_from_json(const nlohmann::json& j);

struct TaskParse {
    std::vector<AgentTask> tasks;
    std::vector<std::string> warnings;
};

// Parses every <TASK type="...">key: value ...</TASK> block in order. Blocks
// without a type, without a closing tag, with non "key: value" lines, or
// failing AgentTask::validate are dropped with a warning.
TaskParse parse_task_blocks(std::string_view text);

TaskParse identify_agent_tasks(const std::string& user_prompt, const std::string& system_instruction,
                               const Generator& generator);

struct TaskContext {
    std::string user_prompt;
    std::vector<Snippet> snippets;
    const Generator* generator = nullptr;
};

using TaskHandler = std::function<AgentResult(const AgentTask&, const TaskContext&)>;

// Open-ended map from task type to handler.
class AgentRegistry {
public:
    void register_handler(std::string task_type, TaskHandler handler);
    bool has_handler(std::string_view task_type) const;

    // Unknown types are skipped with "no handler"; a throwing handler yields
    // status failed with the exception text.
    AgentResult execute(const AgentTask& task, const TaskContext& context) const;

private:
    std::map<std::string, TaskHandler, std::less<>> handlers_;
};

AgentResult execute_task(const AgentTask& task, const TaskContext& context, const AgentRegistry& registry);

// One file per message: "<compact utc timestamp>-<counter>.eml" holding
// "To: ...\nSubject: ...\n\n<body>". Files are created exclusively, so
// concurrent writers never share a name.
class EmailOutbox {
public:
    explicit EmailOutbox(std::filesystem::path directory, Clock clock = now_utc);

    // Returns the written path. Throws std::system_error on I/O failure.
    std::filesystem::path write(const std::string& to, const std::string& subject,
                                const std::string& body);

    const std::filesystem::path& directory() const { return directory_; }

private:
    std::filesystem::path directory_;
    Clock clock_;
    std::atomic<unsigned long> counter_{0};
};

// Body text from the generator (the <EMAIL> span when present), then one
// outbox file.
std::string generate_email_content(const AgentTask& task, const TaskContext& context);
TaskHandler make_email_handler(std::shared_ptr<EmailOutbox> outbox);

}  // namespace slotwise
