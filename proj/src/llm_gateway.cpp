#include "slotwise/llm_gateway.hpp"

#include "slotwise/error.hpp"
#include "slotwise/text.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace slotwise {
namespace {

constexpr std::array<std::string_view, 6> kImageMimes = {"image/png", "image/jpeg", "image/jpg",
                                                         "image/webp", "image/gif", "image/bmp"};
constexpr std::array<std::string_view, 6> kAudioMimes = {"audio/wav", "audio/x-wav", "audio/mpeg",
                                                         "audio/mp4", "audio/ogg", "audio/webm"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& list, std::string_view value) {
    return std::find(list.begin(), list.end(), value) != list.end();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).string();
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::Assistant: return "assistant";
        case Role::User: return "user";
    }
    return "user";
}

Role parse_role(std::string_view text) {
    if (text == "system") return Role::System;
    if (text == "assistant") return Role::Assistant;
    if (text == "user") return Role::User;
    throw Error(ErrorCode::ProtocolError, "unknown role \"" + std::string(text) + "\"");
}

std::string_view to_string(MediaKind kind) {
    switch (kind) {
        case MediaKind::Text: return "text";
        case MediaKind::Image: return "image";
        case MediaKind::Audio: return "audio";
    }
    return "text";
}

MediaKind parse_media_kind(std::string_view text) {
    if (text == "text") return MediaKind::Text;
    if (text == "image") return MediaKind::Image;
    if (text == "audio") return MediaKind::Audio;
    throw Error(ErrorCode::InvalidArgument, "unknown media kind \"" + std::string(text) + "\"");
}

MediaInput MediaInput::text(std::string body) {
    MediaInput m;
    m.kind = MediaKind::Text;
    m.payload = std::move(body);
    m.mime_type = "text/plain";
    return m;
}

void MediaInput::validate() const {
    switch (kind) {
        case MediaKind::Text:
            if (!is_valid_utf8(payload)) throw Error(ErrorCode::InvalidArgument, "text payload is not valid UTF-8");
            return;
        case MediaKind::Image:
            if (!contains(kImageMimes, mime_type)) {
                throw Error(ErrorCode::InvalidArgument, "unrecognized image mime type \"" + mime_type + "\"");
            }
            break;
        case MediaKind::Audio:
            if (!contains(kAudioMimes, mime_type)) {
                throw Error(ErrorCode::InvalidArgument, "unrecognized audio mime type \"" + mime_type + "\"");
            }
            break;
    }
    if (payload.empty() && label.empty()) throw Error(ErrorCode::InvalidArgument, "media payload is empty");
}

void BackendConfig::validate() const {
    if (temperature < 0) throw Error(ErrorCode::Config, "temperature must be >= 0");
    if (max_retries < 0 || max_retries > 10) throw Error(ErrorCode::Config, "max_retries must be in 0..10");
    if (timeout.count() <= 0) throw Error(ErrorCode::Config, "timeout must be positive");
    if (model_id.empty()) throw Error(ErrorCode::Config, "model_id is required");
    if (kind == Kind::Remote) {
        if (base_url.empty()) throw Error(ErrorCode::Config, "remote backend needs base_url");
        if (api_key_env.empty()) throw Error(ErrorCode::Config, "remote backend needs api_key_env");
    } else if (script_path.empty() && !script) {
        throw Error(ErrorCode::Config, "scripted backend needs a script");
    }
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "backend config must be an object");
    BackendConfig c;
    try {
        const auto kind = j.value("kind", std::string("scripted"));
        if (kind == "scripted") {
            c.kind = Kind::Scripted;
        } else if (kind == "remote") {
            c.kind = Kind::Remote;
            c.model_id.clear();
        } else {
            throw Error(ErrorCode::Config, "backend kind must be scripted or remote");
        }
        c.model_id = j.value("model_id", c.model_id);
        c.base_url = j.value("base_url", std::string());
        c.api_key_env = j.value("api_key_env", std::string());
        c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
        c.max_retries = j.value("max_retries", 2);
        c.retry_backoff = std::chrono::milliseconds(j.value("retry_backoff_ms", 250));
        c.temperature = j.value("temperature", 0.0);
        c.supports_images = j.value("supports_images", false);
        if (j.contains("api_key")) {
            throw Error(ErrorCode::Config, "API keys are read only from the environment; use api_key_env");
        }
        if (j.contains("script")) {
            if (j["script"].is_string()) {
                c.script_path = resolve(base_dir, j["script"].get<std::string>());
            } else {
                c.script = j["script"];
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("backend config: ") + e.what());
    }
    c.validate();
    return c;
}

BackendConfig BackendConfig::load_file(const std::string& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Config, "backend config " + path + " is not valid JSON");
    return from_json(j, std::filesystem::path(path).parent_path().string());
}

void validate_chat(const std::vector<Message>& messages) {
    if (messages.empty()) throw Error(ErrorCode::ProtocolError, "chat request has no messages");
    if (messages.front().role != Role::System) {
        throw Error(ErrorCode::ProtocolError, "first chat message must have role system");
    }
    for (const auto& m : messages) {
        if (m.content.empty()) {
            throw Error(ErrorCode::ProtocolError, "empty " + std::string(to_string(m.role)) + " message");
        }
    }
}

std::string LlmBackend::generate(const std::string& prompt) const {
    if (prompt.empty()) throw Error(ErrorCode::ProtocolError, "empty prompt");
    return do_generate(prompt);
}

std::string LlmBackend::generate_chat(const std::vector<Message>& messages) const {
    validate_chat(messages);
    return do_generate_chat(messages);
}

std::string LlmBackend::describe_media(const MediaInput& media) const {
    media.validate();
    return do_describe_media(media);
}

std::string convert_to_text(const MediaInput& media, const LlmBackend& backend) {
    if (media.kind == MediaKind::Text) {
        media.validate();
        return media.payload;
    }
    return backend.describe_media(media);
}

ScriptedBackend::Script ScriptedBackend::Script::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "script must be a JSON object");
    Script s;
    for (const auto& [key, value] : j.items()) {
        if (key == "media") {
            if (!value.is_object()) throw Error(ErrorCode::Config, "script \"media\" must be an object");
            s.media.emplace();
            for (const auto& [label, description] : value.items()) {
                if (!description.is_string()) throw Error(ErrorCode::Config, "media description must be a string");
                (*s.media)[label] = description.get<std::string>();
            }
            continue;
        }
        if (key.empty()) throw Error(ErrorCode::Config, "script keys must be non-empty");
        if (!value.is_string()) throw Error(ErrorCode::Config, "script response for \"" + key + "\" must be a string");
        s.responses[key] = value.get<std::string>();
    }
    return s;
}

ScriptedBackend::Script ScriptedBackend::Script::load_file(const std::string& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Config, "script " + path + " is not valid JSON");
    return from_json(j);
}

ScriptedBackend::ScriptedBackend(Script script, std::string model_id)
    : script_(std::move(script)), model_id_(std::move(model_id)) {}

const std::string& ScriptedBackend::lookup(std::string_view prompt) const {
    static const std::string unscripted(kUnscripted);
    const std::string* best_key = nullptr;
    const std::string* best = nullptr;
    // std::map iterates keys in ascending order, so the first key of the
    // maximal length wins ties.
    for (const auto& [key, response] : script_.responses) {
        if (prompt.find(key) == std::string_view::npos) continue;
        if (!best_key || key.size() > best_key->size()) {
            best_key = &key;
            best = &response;
        }
    }
    return best ? *best : unscripted;
}

std::string ScriptedBackend::do_generate(const std::string& prompt) const { return lookup(prompt); }

std::string ScriptedBackend::do_generate_chat(const std::vector<Message>& messages) const {
    std::string joined;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (i) joined.push_back('\n');
        joined += messages[i].content;
    }
    return lookup(joined);
}

std::string ScriptedBackend::do_describe_media(const MediaInput& media) const {
    if (!script_.media) {
        throw Error(ErrorCode::UnsupportedModality,
                    "backend " + model_id_ + " cannot read " + std::string(to_string(media.kind)) + " input");
    }
    const auto it = script_.media->find(media.label);
    return it == script_.media->end() ? std::string(kUnscripted) : it->second;
}

std::pair<std::string, std::string> split_base_url(std::string_view url) {
    const auto scheme = url.find("://");
    const auto host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', host_start);
    if (slash == std::string_view::npos) return {std::string(url), ""};
    std::string path(url.substr(slash));
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {std::string(url.substr(0, slash)), path};
}

std::string chat_request_body(const std::string& model, const std::vector<Message>& messages,
                              double temperature) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : messages) {
        nlohmann::ordered_json msg;
        msg["role"] = to_string(m.role);
        msg["content"] = m.content;
        body["messages"].push_back(std::move(msg));
    }
    body["temperature"] = temperature;
    return body.dump();
}

std::string parse_chat_response(std::string_view body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ProtocolError, "chat response is not JSON");
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) {
        throw Error(ErrorCode::ProtocolError, "chat response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
        throw Error(ErrorCode::ProtocolError, "chat response choice has no message content");
    }
    return first["message"]["content"].get<std::string>();
}

RemoteBackend::RemoteBackend(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (config_.kind != BackendConfig::Kind::Remote) throw Error(ErrorCode::Config, "not a remote backend config");
    if (!transport_) throw Error(ErrorCode::Config, "remote backend needs a transport");
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
        throw Error(ErrorCode::Config, "environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
    std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
}

std::string RemoteBackend::post_with_retries(const std::string& body) const {
    HttpRequest request;
    request.base_url = origin_;
    request.path = path_prefix_ + "/chat/completions";
    request.body = body;
    request.headers = {{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}};
    request.timeout = config_.timeout;

    const int max_attempts = 1 + config_.max_retries;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        try {
            const auto response = transport_->post(request);
            if (response.status >= 200 && response.status < 300) return parse_chat_response(response.body);
            last_error = "HTTP " + std::to_string(response.status);
            if (!retryable(response.status)) {
                throw BackendUnavailable(config_.model_id + ": " + last_error, attempt);
            }
        } catch (const TransportError& e) {
            last_error = e.what();
        }
        if (attempt < max_attempts && config_.retry_backoff.count() > 0) {
            std::this_thread::sleep_for(config_.retry_backoff * attempt);
        }
    }
    throw BackendUnavailable(config_.model_id + ": " + last_error + " after " + std::to_string(max_attempts) +
                                 " attempts",
                             max_attempts);
}

std::string RemoteBackend::do_generate(const std::string& prompt) const {
    return post_with_retries(chat_request_body(config_.model_id, {{Role::User, prompt}}, config_.temperature));
}

std::string RemoteBackend::do_generate_chat(const std::vector<Message>& messages) const {
    return post_with_retries(chat_request_body(config_.model_id, messages, config_.temperature));
}

std::string RemoteBackend::do_describe_media(const MediaInput& media) const {
    if (media.kind != MediaKind::Image || !config_.supports_images) {
        throw Error(ErrorCode::UnsupportedModality,
                    "backend " + config_.model_id + " cannot read " + std::string(to_string(media.kind)) + " input");
    }
    nlohmann::ordered_json body;
    body["model"] = config_.model_id;
    nlohmann::ordered_json text_part;
    text_part["type"] = "text";
    text_part["text"] = "Describe this image for a well-being assistant. Report every health-relevant value it shows.";
    nlohmann::ordered_json image_part;
    image_part["type"] = "image_url";
    image_part["image_url"]["url"] = "data:" + media.mime_type + ";base64," + base64_encode(media.payload);
    nlohmann::ordered_json message;
    message["role"] = "user";
    message["content"] = nlohmann::ordered_json::array({text_part, image_part});
    body["messages"] = nlohmann::ordered_json::array({message});
    body["temperature"] = config_.temperature;
    return post_with_retries(body.dump());
}

std::shared_ptr<LlmBackend> make_backend(const BackendConfig& config, std::shared_ptr<HttpTransport> transport) {
    config.validate();
    if (config.kind == BackendConfig::Kind::Remote) {
        return std::make_shared<RemoteBackend>(config, transport ? std::move(transport) : make_http_transport());
    }
    auto script = config.script ? ScriptedBackend::Script::from_json(*config.script)
                                : ScriptedBackend::Script::load_file(config.script_path);
    return std::make_shared<ScriptedBackend>(std::move(script), config.model_id);
}

}  // namespace slotwise
