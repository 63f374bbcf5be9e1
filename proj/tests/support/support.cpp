#include "support.hpp"

#include "slotwise/error.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace slotwise::testing {

std::vector<std::string> RecordingBackend::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::vector<std::vector<Message>> RecordingBackend::chats() const {
    std::lock_guard lock(mutex_);
    return chats_;
}

std::string RecordingBackend::do_generate(const std::string& prompt) const {
    {
        std::lock_guard lock(mutex_);
        prompts_.push_back(prompt);
    }
    return inner_->generate(prompt);
}

std::string RecordingBackend::do_generate_chat(const std::vector<Message>& messages) const {
    {
        std::lock_guard lock(mutex_);
        chats_.push_back(messages);
    }
    return inner_->generate_chat(messages);
}

std::string RecordingBackend::do_describe_media(const MediaInput& media) const { return inner_->describe_media(media); }

std::string DownBackend::do_generate(const std::string&) const {
    ++calls;
    throw BackendUnavailable("backend down", 3);
}

std::string DownBackend::do_generate_chat(const std::vector<Message>&) const {
    ++calls;
    throw BackendUnavailable("backend down", 3);
}

std::string DownBackend::do_describe_media(const MediaInput&) const {
    ++calls;
    throw BackendUnavailable("backend down", 3);
}

HttpResponse FakeTransport::post(const HttpRequest& request) const {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (next_ >= responses_.size()) throw TransportError("no more canned responses");
    const auto response = responses_[next_++];
    if (response.status == 0) throw TransportError("connection refused");
    return response;
}

std::vector<HttpRequest> FakeTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::shared_ptr<ScriptedBackend> scripted(const nlohmann::json& script, std::string model_id) {
    return std::make_shared<ScriptedBackend>(ScriptedBackend::Script::from_json(script), std::move(model_id));
}

TempDir::TempDir() {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
        path_ = base / ("slotwise-test-" + std::to_string(rd()) + std::to_string(rd()));
        if (std::filesystem::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

Clock fixed_clock(std::string_view iso8601) {
    const auto t = parse_iso8601(iso8601);
    return [t] { return t; };
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace slotwise::testing
