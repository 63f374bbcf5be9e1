#pragma once

#include "slotwise/llm_gateway.hpp"
#include "slotwise/text.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace slotwise::testing {

// Wraps a backend and keeps every prompt and chat request it forwards.
class RecordingBackend final : public LlmBackend {
public:
    explicit RecordingBackend(std::shared_ptr<LlmBackend> inner) : inner_(std::move(inner)) {}

    const std::string& model_id() const override { return inner_->model_id(); }

    std::vector<std::string> prompts() const;
    std::vector<std::vector<Message>> chats() const;

protected:
    std::string do_generate(const std::string& prompt) const override;
    std::string do_generate_chat(const std::vector<Message>& messages) const override;
    std::string do_describe_media(const MediaInput& media) const override;

private:
    std::shared_ptr<LlmBackend> inner_;
    mutable std::mutex mutex_;
    mutable std::vector<std::string> prompts_;
    mutable std::vector<std::vector<Message>> chats_;
};

// Every call throws BackendUnavailable.
class DownBackend final : public LlmBackend {
public:
    const std::string& model_id() const override { return id_; }
    mutable std::atomic<int> calls{0};

protected:
    std::string do_generate(const std::string&) const override;
    std::string do_generate_chat(const std::vector<Message>&) const override;
    std::string do_describe_media(const MediaInput&) const override;

private:
    std::string id_ = "down";
};

// Replays a queue of canned responses; a status of 0 means "throw
// TransportError". Keeps the requests it saw.
class FakeTransport final : public HttpTransport {
public:
    explicit FakeTransport(std::vector<HttpResponse> responses) : responses_(std::move(responses)) {}

    HttpResponse post(const HttpRequest& request) const override;

    std::vector<HttpRequest> requests() const;

private:
    mutable std::mutex mutex_;
    mutable std::vector<HttpRequest> requests_;
    std::vector<HttpResponse> responses_;
    mutable std::size_t next_ = 0;
};

std::shared_ptr<ScriptedBackend> scripted(const nlohmann::json& script, std::string model_id = "scripted");

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Always returns the same instant.
Clock fixed_clock(std::string_view iso8601 = "2026-10-18T20:08:12.345Z");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace slotwise::testing
