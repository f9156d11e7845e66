#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "qkdkem/kem.hpp"
#include "qkdkem/qkd_client.hpp"
#include "qkdkem/uuid.hpp"

namespace qkdkem::hybrid {

enum class Api { etsi004, etsi014 };
enum class Flow { client_initiated, server_initiated };

std::string_view api_name(Api api);
std::string_view flow_name(Flow flow);

/// A negotiable hybrid group: one PQC KEM plus one QKD delivery style.
/// The server-initiated flow only works with the stateless ETSI 014 API;
/// make() enforces that, so an invalid combination cannot be constructed.
struct HybridSuite {
    std::string kem_name;
    Api api;
    Flow flow;
    uint16_t group_code = 0;

    static HybridSuite make(std::string kem_name, Api api, Flow flow,
                            uint16_t group_code);  // throws invalid_suite / unknown_suite

    const kem::Kem& kem() const;
};

/// pk || key_id. The 16-byte key id is appended raw, client-initiated flow
/// only; both sides know the layout from the negotiated group.
struct PublicPayload {
    Bytes pk;
    std::optional<Uuid> key_id;

    Bytes encode() const;
    static PublicPayload parse(const HybridSuite& suite, ByteView wire);  // malformed_payload
};

/// pq_ct || key_id, the key id present in the server-initiated flow only.
struct Ciphertext {
    Bytes pq_ct;
    std::optional<Uuid> key_id;

    Bytes encode() const;
    static Ciphertext parse(const HybridSuite& suite, ByteView wire);  // malformed_ciphertext
};

/// pq_ss || qkd_key, QKD bytes strictly last. No KDF is applied here; key
/// scheduling stays the caller's responsibility.
struct Secret {
    Bytes bytes;
    size_t pq_len = 0;

    ByteView pq_part() const { return ByteView(bytes).first(pq_len); }
    ByteView qkd_part() const { return ByteView(bytes).subspan(pq_len); }
};

/// Everything one party needs to reach its KME.
struct QkdBinding {
    std::shared_ptr<qkd::KmeTransport> transport;
    std::string local_sae = "sae-a";
    std::string peer_sae = "sae-b";
    size_t qkd_key_len = 32;
    qkd::QosSpec qos{};
    qkd::RetryPolicy retry{};
};

/// Single-owner per-handshake state: the KEM keypair, the QKD key reference
/// and, in client-initiated ETSI 014, the key bytes cached at keygen. An open
/// ETSI 004 stream is closed at teardown (close() or destruction).
class Context {
public:
    Context(HybridSuite suite, QkdBinding binding);
    ~Context();

    Context(const Context&) = delete;
    Context& operator=(const Context&) = delete;
    Context(Context&& other) noexcept;  // transfers stream ownership
    Context& operator=(Context&&) = delete;

    // Key generation (initiator). Client-initiated flows do their QKD work
    // here: one 014 GET_KEY grant, or one 004 OPEN_CONNECT. Server-initiated
    // keygen is pure KEM keygen with zero QKD calls.
    PublicPayload keygen(ByteView seed);

    // Encapsulation (responder), from the peer's encoded payload.
    std::pair<Ciphertext, Secret> encaps(ByteView payload_wire, ByteView randomness);

    // Decapsulation (initiator), completes the exchange. Client-initiated
    // ETSI 014 uses the cached key and makes zero QKD calls.
    Secret decaps(ByteView ciphertext_wire);

    void close();  // tear down an open 004 stream, idempotent

    const HybridSuite& suite() const { return suite_; }
    const kem::Keypair& keypair() const;
    std::optional<Uuid> key_id() const { return key_id_; }

private:
    qkd::QkdKey fetch_stream_key_with_retry(const Uuid& stream_id);

    HybridSuite suite_;
    QkdBinding binding_;
    std::unique_ptr<qkd::Etsi014Client> etsi014_;
    std::unique_ptr<qkd::Etsi004Client> etsi004_;
    std::optional<kem::Keypair> keypair_;
    std::optional<Uuid> key_id_;
    std::optional<qkd::QkdKey> cached_key_;
    bool stream_open_ = false;
};

struct QkdCallCounts {
    int keygen = 0;
    int encaps = 0;
    int decaps = 0;

    bool operator==(const QkdCallCounts&) const = default;
};

// Expected per-phase QKD API round trips for a successful handshake of the
// given suite: {1,1,0} client-initiated 014, {1,2,1} client-initiated 004,
// {0,1,1} server-initiated 014. CLOSE at teardown is not counted.
QkdCallCounts expected_call_counts(const HybridSuite& suite);

}  // namespace qkdkem::hybrid
