#pragma once

#include <memory>
#include <string>
#include <thread>

#include "qkdkem/kme.hpp"
#include "qkdkem/qkd_client.hpp"

namespace httplib {
class Server;
}

namespace qkdkem::kme {

/// Serves one KME endpoint over HTTP until stopped. Port 0 binds an
/// ephemeral port.
class KmeHttpServer {
public:
    KmeHttpServer(std::shared_ptr<KmeEndpoint> endpoint, const std::string& host,
                  int port);  // throws bind_failure
    ~KmeHttpServer();

    KmeHttpServer(const KmeHttpServer&) = delete;
    KmeHttpServer& operator=(const KmeHttpServer&) = delete;

    void stop();
    int port() const { return port_; }
    std::string base_url() const;

private:
    std::shared_ptr<KmeEndpoint> endpoint_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = 0;
};

/// KmeTransport over HTTP. Connection failures surface as Errc::transport,
/// deadline expiry as Errc::timeout.
class HttpTransport : public qkd::KmeTransport {
public:
    explicit HttpTransport(std::string base_url, int timeout_ms = 10000);
    ~HttpTransport() override;

    qkd::WireResponse get(const std::string& path) override;
    qkd::WireResponse post(const std::string& path, const std::string& body) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace qkdkem::kme
