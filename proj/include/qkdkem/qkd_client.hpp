#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkdkem/bytes.hpp"
#include "qkdkem/uuid.hpp"

namespace qkdkem::qkd {

struct QkdKey {
    Bytes bytes;
};

enum class Role { initiator, responder };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

// ETSI 004 quality-of-service block. key_chunk_size must equal the KME's
// configured key length in this artifact.
struct QosSpec {
    size_t key_chunk_size = 32;  // bytes
    int timeout_ms = 1000;
    int max_bps = 0;
};

struct StatusReport {
    std::string source_kme_id;
    std::string target_kme_id;
    size_t stored_key_count = 0;
    size_t key_size_bits = 0;
};

// Backoff for retryable peer_session_not_ready results.
struct RetryPolicy {
    int interval_ms = 10;
    int cap_ms = 1000;
};

struct WireResponse {
    int status = 0;
    std::string body;
};

/// Synchronous request/response channel to one KME. Implementations exist
/// for in-process dispatch and HTTP; both carry the same paths and JSON
/// bodies so the clients are transport-agnostic.
class KmeTransport {
public:
    virtual ~KmeTransport() = default;
    virtual WireResponse get(const std::string& path) = 0;
    virtual WireResponse post(const std::string& path, const std::string& json_body) = 0;
};

/// Stateless block key delivery: GET_STATUS, GET_KEY, GET_KEY_WITH_IDS.
class Etsi014Client {
public:
    explicit Etsi014Client(std::shared_ptr<KmeTransport> transport,
                           size_t key_size_bits = 256);

    StatusReport get_status(const std::string& peer_sae);

    // Grants `number` fresh keys; each is atomically marked consumed on the KME.
    std::vector<std::pair<QkdKeyId, QkdKey>> get_key(const std::string& peer_sae,
                                                     size_t number = 1);

    // Fetches the slave-side copies for previously granted ids and retires them.
    std::vector<QkdKey> get_key_with_ids(const std::string& peer_sae,
                                         const std::vector<QkdKeyId>& ids);

private:
    std::shared_ptr<KmeTransport> transport_;
    size_t key_size_bits_;
};

/// Stateful stream key delivery: OPEN_CONNECT, GET_KEY, CLOSE. One client
/// instance represents one SAE end and remembers the role it opened each
/// stream with.
class Etsi004Client {
public:
    explicit Etsi004Client(std::shared_ptr<KmeTransport> transport);

    // Initiator passes no key_stream_id and receives a fresh one; responder
    // passes the initiator's id and binds to the existing stream.
    QkdKeyId open_connect(Role role, const std::string& source_sae,
                          const std::string& dest_sae, const QosSpec& qos,
                          std::optional<QkdKeyId> key_stream_id = {});

    // Both ends receive identical bytes for equal (key_stream_id, index).
    QkdKey get_key(const QkdKeyId& key_stream_id, uint32_t index = 0);

    void close(const QkdKeyId& key_stream_id);

    bool has_open_stream(const QkdKeyId& key_stream_id) const;

private:
    std::shared_ptr<KmeTransport> transport_;
    std::map<QkdKeyId, Role> open_streams_;
};

}  // namespace qkdkem::qkd
