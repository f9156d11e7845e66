#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "qkdkem/qkd_client.hpp"
#include "qkdkem/uuid.hpp"

namespace qkdkem::kme {

// Injected per API round trip: delay = fixed_ms + U[0, jitter_ms].
struct LatencyModel {
    double fixed_ms = 0.0;
    double jitter_ms = 0.0;
};

struct KmeConfig {
    size_t pool_size = 128;
    size_t qkd_key_len = 32;  // bytes
    LatencyModel latency{};
    uint64_t seed = 0;
    std::string kme_a_id = "KME_A";
    std::string kme_b_id = "KME_B";
};

enum class KeyState { fresh, granted, retired };

struct PoolCounts {
    size_t fresh = 0;
    size_t granted = 0;
    size_t retired = 0;
};

struct LedgerEntry {
    uint64_t seq = 0;
    std::string api;   // "etsi014" | "etsi004"
    std::string op;    // "GET_KEY" | "GET_KEY_WITH_IDS" | "OPEN_CONNECT" | "CLOSE"
    Uuid key_id;       // granted key or key stream id
    std::string party; // serving KME endpoint id
    std::string sae;   // SAE named in the request
    int64_t timestamp_us = 0;
};

struct StreamState {
    std::array<uint8_t, 32> stream_seed{};
    bool initiator_open = false;
    bool responder_open = false;
    bool initiator_closed = false;
    bool responder_closed = false;
    qkd::QosSpec qos;
};

/// Shared state of a paired KME deployment: one synchronized key pool, the
/// ETSI 004 stream table and the grant ledger. Pool and stream keys derive
/// from HMAC-SHA-256 over the configured seed (see docs/PROTOCOL.md), so an
/// independent oracle can regenerate every byte this store ever serves.
class KmeStore {
public:
    explicit KmeStore(const KmeConfig& config);  // throws invalid_config

    const KmeConfig& config() const { return config_; }

    // ETSI 014
    qkd::StatusReport status(const std::string& party, const std::string& peer_kme_id,
                             const std::string& sae) const;
    std::vector<std::pair<Uuid, qkd::QkdKey>> grant_keys(const std::string& party,
                                                         const std::string& sae,
                                                         size_t number);
    std::vector<qkd::QkdKey> retire_keys(const std::string& party, const std::string& sae,
                                         const std::vector<Uuid>& ids);

    // ETSI 004
    Uuid open_connect(const std::string& party, const std::string& sae, qkd::Role role,
                      const qkd::QosSpec& qos, const std::optional<Uuid>& key_stream_id);
    qkd::QkdKey stream_key(const std::string& party, const std::string& sae,
                           qkd::Role role, const Uuid& key_stream_id, uint32_t index);
    void close_stream(const std::string& party, const std::string& sae, qkd::Role role,
                      const Uuid& key_stream_id);

    // Introspection
    std::vector<LedgerEntry> ledger_snapshot() const;
    uint64_t ledger_size() const;
    PoolCounts pool_counts() const;
    size_t stream_count() const;

    double sample_delay_ms();

private:
    void append_ledger(const std::string& api, const std::string& op, const Uuid& id,
                       const std::string& party, const std::string& sae);

    KmeConfig config_;
    mutable std::mutex mutex_;

    struct PoolKey {
        Uuid id;
        Bytes key;
        KeyState state = KeyState::fresh;
    };
    std::vector<PoolKey> pool_;
    std::unordered_map<Uuid, size_t, UuidHash> pool_index_;
    std::map<Uuid, StreamState> streams_;
    uint64_t stream_counter_ = 0;
    std::vector<LedgerEntry> ledger_;
    std::mt19937_64 jitter_rng_;
};

/// One of the two paired KME service endpoints. Routes wire requests to the
/// shared store and injects the configured latency once per request.
class KmeEndpoint {
public:
    KmeEndpoint(std::shared_ptr<KmeStore> store, std::string id, std::string peer_id);

    qkd::WireResponse handle(std::string_view method, std::string_view path,
                             std::string_view body);

    const std::string& id() const { return id_; }
    const std::shared_ptr<KmeStore>& store() const { return store_; }

private:
    qkd::WireResponse dispatch(std::string_view method, std::string_view path,
                               std::string_view body);

    std::shared_ptr<KmeStore> store_;
    std::string id_;
    std::string peer_id_;
};

struct KmePair {
    std::shared_ptr<KmeStore> store;
    std::shared_ptr<KmeEndpoint> a;
    std::shared_ptr<KmeEndpoint> b;
};

// Two endpoints over one synchronized store, pools derived from config.seed.
KmePair kme_spawn(const KmeConfig& config);

inline std::vector<LedgerEntry> ledger_snapshot(const KmeEndpoint& endpoint) {
    return endpoint.store()->ledger_snapshot();
}

/// Dispatches the wire protocol straight into a KmeEndpoint. Latency applies
/// exactly as it does over HTTP.
class InProcessTransport : public qkd::KmeTransport {
public:
    explicit InProcessTransport(std::shared_ptr<KmeEndpoint> endpoint)
        : endpoint_(std::move(endpoint)) {}

    qkd::WireResponse get(const std::string& path) override {
        return endpoint_->handle("GET", path, "");
    }
    qkd::WireResponse post(const std::string& path, const std::string& body) override {
        return endpoint_->handle("POST", path, body);
    }

private:
    std::shared_ptr<KmeEndpoint> endpoint_;
};

}  // namespace qkdkem::kme
