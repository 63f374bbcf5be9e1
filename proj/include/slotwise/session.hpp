#pragma once

#include "slotwise/agents.hpp"
#include "slotwise/grounding.hpp"
#include "slotwise/slot_engine.hpp"
#include "slotwise/text.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

struct TurnRecord {
    std::string user_input_text;
    SlotSet slot_set;
    std::string user_prompt;
    std::string system_instruction;
    std::vector<Snippet> grounding;
    std::vector<AgentResult> agent_results;
    std::string response;
    TemplateSet slot_templates;  // in effect when the turn started
    Timestamp timestamp{};
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    static TurnRecord from_json(const nlohmann::json& j);

    bool operator==(const TurnRecord&) const = default;
};

struct IntentLogEntry {
    std::string intent;
    SlotName category = SlotName::TONE;
    Timestamp timestamp{};

    bool operator==(const IntentLogEntry&) const = default;
};

struct FeedbackInput {
    enum class Kind { Text, Rating };
    enum class Rating { Like, Dislike };

    Kind kind = Kind::Text;
    std::string text;
    Rating rating = Rating::Like;
    int target_turn_index = 0;

    nlohmann::json to_json() const;
    // Throws Error(InvalidArgument).
    static FeedbackInput from_json(const nlohmann::json& j);

    bool operator==(const FeedbackInput&) const = default;
};

struct SessionState {
    std::string session_id;
    std::vector<TurnRecord> history;
    TemplateSet current_templates;
    bool feedback_flag = false;
    std::vector<IntentLogEntry> intent_log;

    nlohmann::json to_json() const;
    static SessionState from_json(const nlohmann::json& j);

    bool operator==(const SessionState&) const = default;
};

// Result of one feedback pass, persisted as a template_update event.
struct TemplateUpdate {
    bool changed = false;
    std::optional<SlotName> slot;
    std::string intent;
    std::string directive;  // the line appended to the template, if changed
    TemplateSet templates;  // full set after the update
    std::vector<std::string> warnings;
    Timestamp timestamp{};

    nlohmann::json to_json() const;
    static TemplateUpdate from_json(const nlohmann::json& j);
};

// One session plus its append-only JSON Lines log. Every mutation is written
// to the log first and then applied through the same code path replay uses,
// so replaying the log reproduces the in-memory state exactly. Not
// thread-safe on its own; SessionStore serializes access.
class Session {
public:
    // An empty log_path keeps the session in memory only.
    Session(std::string session_id, TemplateSet initial_templates, std::filesystem::path log_path);

    // Rebuilds a session from its log. A torn final line is ignored.
    static Session replay(const std::filesystem::path& log_path, std::string session_id,
                          TemplateSet initial_templates);

    const SessionState& state() const { return state_; }
    std::uint64_t last_sequence() const { return seq_; }
    bool persisted() const { return seq_ > 0; }

    // Throws Error(SessionWriteError) leaving the state untouched.
    void append_turn(const TurnRecord& turn);
    // Sets feedback_flag.
    void record_feedback(const FeedbackInput& feedback);
    // Stores new templates (if changed) into current_templates and the last
    // turn's snapshot, logs the intent, and clears feedback_flag.
    void apply_template_update(const TemplateUpdate& update);

private:
    void persist_and_apply(nlohmann::json event);
    void apply_event(const nlohmann::json& event);

    SessionState state_;
    std::filesystem::path log_path_;
    std::uint64_t seq_ = 0;
};

// Owns all sessions and hands out exclusive leases, one writer per session.
class SessionStore {
public:
    // An empty directory keeps everything in memory.
    explicit SessionStore(std::filesystem::path directory, TemplateSet initial_templates = {});

    class Lease {
    public:
        Session& operator*() const { return *session_; }
        Session* operator->() const { return session_; }

    private:
        friend class SessionStore;
        Lease(std::shared_ptr<void> keep_alive, std::unique_lock<std::mutex> lock, Session* session)
            : keep_alive_(std::move(keep_alive)), lock_(std::move(lock)), session_(session) {}
        std::shared_ptr<void> keep_alive_;
        std::unique_lock<std::mutex> lock_;
        Session* session_;
    };

    // Creates the session when missing. Throws Error(InvalidArgument) for ids
    // that are empty or not [A-Za-z0-9_.-]+.
    Lease open(const std::string& session_id);
    std::optional<Lease> find(const std::string& session_id);
    std::optional<SessionState> snapshot(const std::string& session_id);

    // Ids of sessions that have at least one persisted event, sorted.
    std::vector<std::string> ids();

    // Loads every <id>.jsonl under the directory. Returns the number loaded.
    std::size_t replay_all();

    const std::filesystem::path& directory() const { return directory_; }
    const TemplateSet& initial_templates() const { return initial_templates_; }

    static void validate_id(const std::string& session_id);

private:
    struct Entry {
        std::mutex mutex;
        std::unique_ptr<Session> session;
    };

    std::filesystem::path log_path_for(const std::string& session_id) const;

    std::filesystem::path directory_;
    TemplateSet initial_templates_;
    std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

}  // namespace slotwise
