#pragma once

#include "slotwise/generator.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

enum class Role { System, Assistant, User };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct Message {
    Role role = Role::User;
    std::string content;

    bool operator==(const Message&) const = default;
};

enum class MediaKind { Text, Image, Audio };

std::string_view to_string(MediaKind kind);
MediaKind parse_media_kind(std::string_view text);

struct MediaInput {
    MediaKind kind = MediaKind::Text;
    std::string payload;  // character data for text, raw bytes otherwise
    std::string mime_type;
    std::string label;  // e.g. the uploaded filename; keys scripted media lookups

    static MediaInput text(std::string body);

    // Throws Error(InvalidArgument): text must be valid UTF-8, image/audio must
    // carry a recognized mime type of the matching family.
    void validate() const;
};

struct BackendConfig {
    enum class Kind { Scripted, Remote };

    Kind kind = Kind::Scripted;
    std::string model_id = "scripted";
    std::string base_url;
    std::string api_key_env;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;
    std::chrono::milliseconds retry_backoff{250};
    double temperature = 0.0;
    bool supports_images = false;
    // Scripted only: a script file, or the script document itself.
    std::string script_path;
    std::optional<nlohmann::json> script;

    // Throws Error(Config).
    void validate() const;

    static BackendConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    static BackendConfig load_file(const std::string& path);
};

// NVI wrapper: the public entry points enforce the message and prompt
// contracts, subclasses only talk to their model.
class LlmBackend : public Generator {
public:
    // Throws Error(ProtocolError) for an empty prompt.
    std::string generate(const std::string& prompt) const final;
    // Throws Error(ProtocolError) unless messages is non-empty, starts with a
    // system message, and has no empty contents.
    std::string generate_chat(const std::vector<Message>& messages) const;
    // Throws Error(UnsupportedModality) when the backend cannot read media.
    std::string describe_media(const MediaInput& media) const;

    virtual const std::string& model_id() const = 0;

protected:
    virtual std::string do_generate(const std::string& prompt) const = 0;
    virtual std::string do_generate_chat(const std::vector<Message>& messages) const = 0;
    virtual std::string do_describe_media(const MediaInput& media) const = 0;
};

void validate_chat(const std::vector<Message>& messages);

// Text passes through unchanged; image/audio go to the backend's media call.
std::string convert_to_text(const MediaInput& media, const LlmBackend& backend);

inline constexpr std::string_view kUnscripted = "[unscripted]";

// Deterministic backend for tests and offline runs. Each prompt is answered
// with the response of the longest registered key that occurs in it (ties go
// to the lexicographically smaller key); chat requests match against the
// message contents joined with '\n'.
class ScriptedBackend final : public LlmBackend {
public:
    struct Script {
        std::map<std::string, std::string> responses;
        // Media label -> description. Absent means no media capability.
        std::optional<std::map<std::string, std::string>> media;

        // {"key": "response", ..., "media": {"label": "description"}}
        static Script from_json(const nlohmann::json& j);
        static Script load_file(const std::string& path);
    };

    explicit ScriptedBackend(Script script, std::string model_id = "scripted");

    const std::string& model_id() const override { return model_id_; }
    const std::string& lookup(std::string_view prompt) const;

protected:
    std::string do_generate(const std::string& prompt) const override;
    std::string do_generate_chat(const std::vector<Message>& messages) const override;
    std::string do_describe_media(const MediaInput& media) const override;

private:
    Script script_;
    std::string model_id_;
};

struct HttpRequest {
    std::string base_url;  // scheme://host[:port]
    std::string path;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
    std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Throws TransportError when no HTTP response was obtained.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& request) const = 0;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::shared_ptr<HttpTransport> make_http_transport();

// Splits "http://host:8080/v1" into ("http://host:8080", "/v1").
std::pair<std::string, std::string> split_base_url(std::string_view url);

// {"model": ..., "messages": [{"role": ..., "content": ...}], "temperature": ...}
std::string chat_request_body(const std::string& model, const std::vector<Message>& messages,
                              double temperature);
// Content of the first choice's message.
std::string parse_chat_response(std::string_view body);

// Chat-completion client. At most 1 + max_retries attempts per call.
class RemoteBackend final : public LlmBackend {
public:
    explicit RemoteBackend(BackendConfig config,
                           std::shared_ptr<HttpTransport> transport = make_http_transport());

    const std::string& model_id() const override { return config_.model_id; }

protected:
    std::string do_generate(const std::string& prompt) const override;
    std::string do_generate_chat(const std::vector<Message>& messages) const override;
    std::string do_describe_media(const MediaInput& media) const override;

private:
    std::string post_with_retries(const std::string& body) const;

    BackendConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    std::string api_key_;
    std::string origin_;
    std::string path_prefix_;
};

std::shared_ptr<LlmBackend> make_backend(const BackendConfig& config,
                                         std::shared_ptr<HttpTransport> transport = nullptr);

}  // namespace slotwise
