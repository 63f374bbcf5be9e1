#include "slotwise/session.hpp"

#include "slotwise/error.hpp"

#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

namespace slotwise {
namespace {

using nlohmann::json;

json string_array(const std::vector<std::string>& items) { return json(items); }

std::vector<std::string> strings_from(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    return j.at(key).get<std::vector<std::string>>();
}

std::string_view kind_name(FeedbackInput::Kind kind) { return kind == FeedbackInput::Kind::Text ? "text" : "rating"; }

std::string_view rating_name(FeedbackInput::Rating r) { return r == FeedbackInput::Rating::Like ? "like" : "dislike"; }

SlotName slot_from(const json& j) {
    const auto text = j.get<std::string>();
    const auto slot = parse_slot_name(text);
    if (!slot) throw Error(ErrorCode::Schema, "unknown slot \"" + text + "\"");
    return *slot;
}

}  // namespace

json TurnRecord::to_json() const {
    json grounding_json = json::array();
    for (const auto& s : grounding) grounding_json.push_back(slotwise::to_json(s));
    json agents_json = json::array();
    for (const auto& r : agent_results) agents_json.push_back(slotwise::to_json(r));
    return {{"user_input_text", user_input_text},
            {"slot_set", slot_set.to_json()},
            {"user_prompt", user_prompt},
            {"system_instruction", system_instruction},
            {"grounding", grounding_json},
            {"agent_results", agents_json},
            {"response", response},
            {"slot_templates", slot_templates.to_json()},
            {"timestamp", format_iso8601(timestamp)},
            {"warnings", string_array(warnings)}};
}

TurnRecord TurnRecord::from_json(const json& j) {
    try {
        TurnRecord t;
        t.user_input_text = j.at("user_input_text").get<std::string>();
        t.slot_set = SlotSet::from_json(j.at("slot_set"));
        t.user_prompt = j.at("user_prompt").get<std::string>();
        t.system_instruction = j.at("system_instruction").get<std::string>();
        for (const auto& s : j.at("grounding")) t.grounding.push_back(snippet_from_json(s));
        for (const auto& r : j.at("agent_results")) t.agent_results.push_back(agent_result_from_json(r));
        t.response = j.at("response").get<std::string>();
        t.slot_templates = TemplateSet::from_json(j.at("slot_templates"));
        t.timestamp = parse_iso8601(j.at("timestamp").get<std::string>());
        t.warnings = strings_from(j, "warnings");
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("turn record: ") + e.what());
    }
}

json FeedbackInput::to_json() const {
    json j{{"kind", kind_name(kind)}, {"target_turn_index", target_turn_index}};
    if (kind == Kind::Text) {
        j["text"] = text;
    } else {
        j["rating"] = rating_name(rating);
    }
    return j;
}

FeedbackInput FeedbackInput::from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "feedback must be an object");
    FeedbackInput f;
    try {
        std::string kind;
        if (j.contains("kind")) {
            kind = j.at("kind").get<std::string>();
        } else {
            kind = j.contains("rating") ? "rating" : "text";
        }
        if (kind == "text") {
            f.kind = Kind::Text;
            if (!j.contains("text") || !j.at("text").is_string()) {
                throw Error(ErrorCode::InvalidArgument, "text feedback needs a \"text\" string");
            }
            f.text = j.at("text").get<std::string>();
            if (trim(f.text).empty()) throw Error(ErrorCode::InvalidArgument, "feedback text is empty");
            if (!is_valid_utf8(f.text)) throw Error(ErrorCode::InvalidArgument, "feedback text is not valid UTF-8");
        } else if (kind == "rating") {
            f.kind = Kind::Rating;
            const auto rating = j.at("rating").get<std::string>();
            if (rating == "like") {
                f.rating = Rating::Like;
            } else if (rating == "dislike") {
                f.rating = Rating::Dislike;
            } else {
                throw Error(ErrorCode::InvalidArgument, "rating must be like or dislike");
            }
        } else {
            throw Error(ErrorCode::InvalidArgument, "feedback kind must be text or rating");
        }
        f.target_turn_index = j.value("target_turn_index", 0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("feedback: ") + e.what());
    }
    if (f.target_turn_index < 0) throw Error(ErrorCode::InvalidArgument, "target_turn_index must be >= 0");
    return f;
}

json SessionState::to_json() const {
    json turns = json::array();
    for (const auto& t : history) turns.push_back(t.to_json());
    json intents = json::array();
    for (const auto& e : intent_log) {
        intents.push_back({{"intent", e.intent}, {"category", to_string(e.category)},
                           {"timestamp", format_iso8601(e.timestamp)}});
    }
    return {{"session_id", session_id},
            {"history", turns},
            {"current_templates", current_templates.to_json()},
            {"feedback_flag", feedback_flag},
            {"intent_log", intents}};
}

SessionState SessionState::from_json(const json& j) {
    try {
        SessionState s;
        s.session_id = j.at("session_id").get<std::string>();
        for (const auto& t : j.at("history")) s.history.push_back(TurnRecord::from_json(t));
        s.current_templates = TemplateSet::from_json(j.at("current_templates"));
        s.feedback_flag = j.at("feedback_flag").get<bool>();
        for (const auto& e : j.at("intent_log")) {
            s.intent_log.push_back({e.at("intent").get<std::string>(),
                                    slot_from(e.at("category")),
                                    parse_iso8601(e.at("timestamp").get<std::string>())});
        }
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("session state: ") + e.what());
    }
}

json TemplateUpdate::to_json() const {
    return {{"changed", changed},
            {"slot", slot ? json(to_string(*slot)) : json(nullptr)},
            {"intent", intent},
            {"directive", directive},
            {"templates", templates.to_json()},
            {"warnings", string_array(warnings)},
            {"timestamp", format_iso8601(timestamp)}};
}

TemplateUpdate TemplateUpdate::from_json(const json& j) {
    try {
        TemplateUpdate u;
        u.changed = j.at("changed").get<bool>();
        if (!j.at("slot").is_null()) u.slot = slot_from(j.at("slot"));
        u.intent = j.at("intent").get<std::string>();
        u.directive = j.at("directive").get<std::string>();
        u.templates = TemplateSet::from_json(j.at("templates"));
        u.warnings = strings_from(j, "warnings");
        u.timestamp = parse_iso8601(j.at("timestamp").get<std::string>());
        return u;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("template update: ") + e.what());
    }
}

Session::Session(std::string session_id, TemplateSet initial_templates, std::filesystem::path log_path)
    : log_path_(std::move(log_path)) {
    state_.session_id = std::move(session_id);
    state_.current_templates = std::move(initial_templates);
}

Session Session::replay(const std::filesystem::path& log_path, std::string session_id, TemplateSet initial_templates) {
    Session session(std::move(session_id), std::move(initial_templates), log_path);
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot read session log " + log_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto content = buf.str();

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        const bool last = nl == std::string::npos || nl + 1 >= content.size();
        const auto line = content.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? content.size() : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        const auto event = json::parse(line, nullptr, false);
        const bool torn = nl == std::string::npos;
        if (event.is_discarded()) {
            // A crash mid-append leaves at most one partial trailing line.
            if (torn || last) break;
            throw LocatedError(ErrorCode::Schema, log_path.string() + ": malformed event", line_no);
        }
        try {
            const auto seq = event.at("seq").get<std::uint64_t>();
            if (seq != session.seq_ + 1) {
                throw LocatedError(ErrorCode::Schema,
                                   log_path.string() + ": expected seq " + std::to_string(session.seq_ + 1), line_no);
            }
            session.apply_event(event);
        } catch (const json::exception& e) {
            throw LocatedError(ErrorCode::Schema, log_path.string() + ": " + e.what(), line_no);
        }
    }
    return session;
}

void Session::persist_and_apply(json event) {
    event["seq"] = seq_ + 1;
    if (!log_path_.empty()) {
        const auto line = event.dump() + "\n";
        std::error_code ec;
        if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path(), ec);
        if (ec) throw Error(ErrorCode::SessionWriteError, "cannot create " + log_path_.parent_path().string() + ": " + ec.message());

        std::FILE* f = std::fopen(log_path_.c_str(), "ab");
        if (!f) throw Error(ErrorCode::SessionWriteError, "cannot open " + log_path_.string());
        const auto before = std::ftell(f);
        bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
        ok = std::fflush(f) == 0 && ok;
        ok = ::fsync(::fileno(f)) == 0 && ok;
        std::fclose(f);
        if (!ok) {
            if (before >= 0) std::filesystem::resize_file(log_path_, static_cast<std::uintmax_t>(before), ec);
            throw Error(ErrorCode::SessionWriteError, "cannot append to " + log_path_.string());
        }
    }
    apply_event(event);
}

void Session::apply_event(const json& event) {
    const auto type = event.at("type").get<std::string>();
    if (type == "turn") {
        state_.history.push_back(TurnRecord::from_json(event.at("turn")));
    } else if (type == "feedback") {
        (void)FeedbackInput::from_json(event.at("feedback"));
        state_.feedback_flag = true;
    } else if (type == "template_update") {
        const auto update = TemplateUpdate::from_json(event.at("update"));
        if (update.changed) {
            state_.current_templates = update.templates;
            if (!state_.history.empty()) state_.history.back().slot_templates = update.templates;
        }
        if (update.slot && !update.intent.empty()) {
            state_.intent_log.push_back({update.intent, *update.slot, update.timestamp});
        }
        state_.feedback_flag = false;
    } else {
        throw Error(ErrorCode::Schema, "unknown session event \"" + type + "\"");
    }
    seq_ = event.at("seq").get<std::uint64_t>();
}

void Session::append_turn(const TurnRecord& turn) { persist_and_apply({{"type", "turn"}, {"turn", turn.to_json()}}); }

void Session::record_feedback(const FeedbackInput& feedback) {
    if (feedback.target_turn_index < 0 || static_cast<std::size_t>(feedback.target_turn_index) >= state_.history.size()) {
        throw Error(ErrorCode::NotFound, "turn " + std::to_string(feedback.target_turn_index) + " does not exist");
    }
    persist_and_apply({{"type", "feedback"}, {"feedback", feedback.to_json()}});
}

void Session::apply_template_update(const TemplateUpdate& update) {
    persist_and_apply({{"type", "template_update"}, {"update", update.to_json()}});
}

SessionStore::SessionStore(std::filesystem::path directory, TemplateSet initial_templates)
    : directory_(std::move(directory)), initial_templates_(std::move(initial_templates)) {}

void SessionStore::validate_id(const std::string& session_id) {
    static const std::regex pattern("[A-Za-z0-9_.-]+");
    if (session_id.empty() || session_id.size() > 128 || !std::regex_match(session_id, pattern) ||
        session_id == "." || session_id == "..") {
        throw Error(ErrorCode::InvalidArgument, "invalid session id \"" + session_id + "\"");
    }
}

std::filesystem::path SessionStore::log_path_for(const std::string& session_id) const {
    if (directory_.empty()) return {};
    return directory_ / (session_id + ".jsonl");
}

SessionStore::Lease SessionStore::open(const std::string& session_id) {
    validate_id(session_id);
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(map_mutex_);
        auto& slot = entries_[session_id];
        if (!slot) {
            auto fresh = std::make_shared<Entry>();
            const auto path = log_path_for(session_id);
            if (!path.empty() && std::filesystem::exists(path)) {
                fresh->session = std::make_unique<Session>(Session::replay(path, session_id, initial_templates_));
            } else {
                fresh->session = std::make_unique<Session>(session_id, initial_templates_, path);
            }
            slot = std::move(fresh);
        }
        entry = slot;
    }
    std::unique_lock session_lock(entry->mutex);
    Session* session = entry->session.get();
    return Lease(std::move(entry), std::move(session_lock), session);
}

std::optional<SessionStore::Lease> SessionStore::find(const std::string& session_id) {
    try {
        validate_id(session_id);
    } catch (const Error&) {
        return std::nullopt;
    }
    {
        std::lock_guard lock(map_mutex_);
        if (!entries_.count(session_id)) {
            const auto path = log_path_for(session_id);
            if (path.empty() || !std::filesystem::exists(path)) return std::nullopt;
        }
    }
    auto lease = open(session_id);
    if (!lease->persisted()) return std::nullopt;
    return lease;
}

std::optional<SessionState> SessionStore::snapshot(const std::string& session_id) {
    auto lease = find(session_id);
    if (!lease) return std::nullopt;
    return (*lease)->state();
}

std::vector<std::string> SessionStore::ids() {
    std::vector<std::pair<std::string, std::shared_ptr<Entry>>> entries;
    {
        std::lock_guard lock(map_mutex_);
        entries.assign(entries_.begin(), entries_.end());
    }
    std::vector<std::string> out;
    for (const auto& [id, entry] : entries) {
        std::lock_guard lock(entry->mutex);
        if (entry->session->persisted()) out.push_back(id);
    }
    return out;
}

std::size_t SessionStore::replay_all() {
    if (directory_.empty() || !std::filesystem::is_directory(directory_)) return 0;
    std::vector<std::string> names;
    for (const auto& file : std::filesystem::directory_iterator(directory_)) {
        if (!file.is_regular_file() || file.path().extension() != ".jsonl") continue;
        names.push_back(file.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    std::size_t loaded = 0;
    for (const auto& id : names) {
        try {
            validate_id(id);
        } catch (const Error&) {
            continue;
        }
        (void)open(id);
        ++loaded;
    }
    return loaded;
}

}  // namespace slotwise
