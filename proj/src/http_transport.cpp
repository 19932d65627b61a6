#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "specfsm/providers.hpp"

namespace specfsm {
namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override {
        HttpResponse out;
        auto scheme_end = request.url.find("://");
        auto path_start = request.url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        std::string base = path_start == std::string::npos ? request.url : request.url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(base);
        const auto secs = static_cast<time_t>(request.timeout_seconds);
        const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);

        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : request.headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                headers.emplace(k, v);
            }
        }
        auto res = client.Post(path, headers, request.body, content_type);
        if (!res) {
            auto err = res.error();
            out.failure = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                              ? HttpResponse::Failure::Timeout
                              : HttpResponse::Failure::Connection;
            out.error = httplib::to_string(err);
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace specfsm
