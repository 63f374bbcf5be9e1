#include "slotwise/llm_gateway.hpp"

#include <httplib.h>

namespace slotwise {
namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) const override {
        httplib::Client client(request.base_url);
        const auto secs = request.timeout.count() / 1000;
        const auto usecs = (request.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);

        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [name, value] : request.headers) {
            if (name == "Content-Type") {
                content_type = value;
            } else {
                headers.emplace(name, value);
            }
        }
        auto result = client.Post(request.path.empty() ? "/" : request.path, headers, request.body, content_type);
        if (!result) throw TransportError("HTTP transport: " + httplib::to_string(result.error()));
        return {result->status, result->body};
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace slotwise
