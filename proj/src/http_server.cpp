#include "slotwise/service.hpp"

#include <httplib.h>

namespace slotwise {
namespace {

void send(httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    if (api.retry_after_seconds) res.set_header("Retry-After", std::to_string(*api.retry_after_seconds));
    res.set_content(api.body.dump(), "application/json");
}

ApiResponse bad_json(const std::string& detail) {
    return {400, {{"error", {{"code", "InvalidArgument"}, {"message", detail}}}}, std::nullopt};
}

template <class Handler>
void post_json(httplib::Server& server, const char* path, Handler handler) {
    server.Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        send(res, body.is_discarded() ? bad_json("request body is not valid JSON") : handler(body));
    });
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(Service& s) : service(s) {
        post_json(server, "/v1/chat", [this](const nlohmann::json& j) { return service.handle_chat(j); });
        post_json(server, "/v1/feedback", [this](const nlohmann::json& j) { return service.handle_feedback(j); });
        post_json(server, "/v1/eval", [this](const nlohmann::json& j) { return service.submit_eval(j); });
        server.Get(R"(/v1/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, service.get_session(req.matches[1]));
        });
        server.Get(R"(/v1/templates/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, service.get_templates(req.matches[1]));
        });
        server.Get(R"(/v1/eval/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, service.get_eval(req.matches[1]));
        });
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace slotwise
