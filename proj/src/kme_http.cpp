#include "qkdkem/kme_http.hpp"

#include <httplib.h>

#include "qkdkem/errors.hpp"

namespace qkdkem::kme {

KmeHttpServer::KmeHttpServer(std::shared_ptr<KmeEndpoint> endpoint,
                             const std::string& host, int port)
    : endpoint_(std::move(endpoint)), server_(std::make_unique<httplib::Server>()),
      host_(host) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        auto out = endpoint_->handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server_->Get(R"(/.*)", forward);
    server_->Post(R"(/.*)", forward);
    // REUSEADDR only; the library default adds REUSEPORT, which would let a
    // second server silently share a bound port instead of failing
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                   sizeof(yes));
    });

    if (port == 0) {
        port_ = server_->bind_to_any_port(host_);
        if (port_ < 0) raise(Errc::bind_failure, "could not bind ephemeral port on " + host_);
    } else {
        if (!server_->bind_to_port(host_, port)) {
            raise(Errc::bind_failure,
                  "could not bind " + host_ + ":" + std::to_string(port));
        }
        port_ = port;
    }
    thread_ = std::thread([srv = server_.get()] { srv->listen_after_bind(); });
    server_->wait_until_ready();
}

KmeHttpServer::~KmeHttpServer() { stop(); }

void KmeHttpServer::stop() {
    if (server_ && server_->is_running()) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string KmeHttpServer::base_url() const {
    return "http://" + host_ + ":" + std::to_string(port_);
}

struct HttpTransport::Impl {
    httplib::Client client;
    explicit Impl(const std::string& base_url) : client(base_url) {}
};

HttpTransport::HttpTransport(std::string base_url, int timeout_ms)
    : impl_(std::make_unique<Impl>(base_url)) {
    impl_->client.set_connection_timeout(0, timeout_ms * 1000);
    impl_->client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    impl_->client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    impl_->client.set_keep_alive(true);
}

HttpTransport::~HttpTransport() = default;

namespace {

qkd::WireResponse unwrap(const httplib::Result& result) {
    if (!result) {
        switch (result.error()) {
            case httplib::Error::ConnectionTimeout:
            case httplib::Error::Read:
            case httplib::Error::Write:
                raise(Errc::timeout, "KME request timed out: " + httplib::to_string(result.error()));
            default:
                raise(Errc::transport, "KME unreachable: " + httplib::to_string(result.error()));
        }
    }
    return {result->status, result->body};
}

}  // namespace

qkd::WireResponse HttpTransport::get(const std::string& path) {
    return unwrap(impl_->client.Get(path));
}

qkd::WireResponse HttpTransport::post(const std::string& path, const std::string& body) {
    return unwrap(impl_->client.Post(path, body, "application/json"));
}

}  // namespace qkdkem::kme
