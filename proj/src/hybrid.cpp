#include "qkdkem/hybrid.hpp"

#include <chrono>
#include <thread>

#include "qkdkem/errors.hpp"

namespace qkdkem::hybrid {

std::string_view api_name(Api api) { return api == Api::etsi004 ? "etsi004" : "etsi014"; }

std::string_view flow_name(Flow flow) {
    return flow == Flow::client_initiated ? "client_initiated" : "server_initiated";
}

HybridSuite HybridSuite::make(std::string kem_name, Api api, Flow flow,
                              uint16_t group_code) {
    if (flow == Flow::server_initiated && api != Api::etsi014) {
        raise(Errc::invalid_suite,
              "server-initiated flow requires the stateless ETSI 014 API");
    }
    kem::require_kem(kem_name);
    return HybridSuite{std::move(kem_name), api, flow, group_code};
}

const kem::Kem& HybridSuite::kem() const { return kem::require_kem(kem_name); }

Bytes PublicPayload::encode() const {
    Bytes out = pk;
    if (key_id) out.insert(out.end(), key_id->bytes.begin(), key_id->bytes.end());
    return out;
}

PublicPayload PublicPayload::parse(const HybridSuite& suite, ByteView wire) {
    size_t pk_len = suite.kem().pk_len();
    size_t expected =
        suite.flow == Flow::client_initiated ? pk_len + 16 : pk_len;
    if (wire.size() != expected) {
        raise(Errc::malformed_payload,
              "public payload must be " + std::to_string(expected) + " bytes, got " +
                  std::to_string(wire.size()));
    }
    PublicPayload out;
    out.pk.assign(wire.begin(), wire.begin() + pk_len);
    if (suite.flow == Flow::client_initiated) {
        out.key_id = Uuid::from_bytes(wire.subspan(pk_len));
    }
    return out;
}

Bytes Ciphertext::encode() const {
    Bytes out = pq_ct;
    if (key_id) out.insert(out.end(), key_id->bytes.begin(), key_id->bytes.end());
    return out;
}

Ciphertext Ciphertext::parse(const HybridSuite& suite, ByteView wire) {
    size_t ct_len = suite.kem().ct_len();
    size_t expected = suite.flow == Flow::server_initiated ? ct_len + 16 : ct_len;
    if (wire.size() != expected) {
        raise(Errc::malformed_ciphertext,
              "ciphertext must be " + std::to_string(expected) + " bytes, got " +
                  std::to_string(wire.size()));
    }
    Ciphertext out;
    out.pq_ct.assign(wire.begin(), wire.begin() + ct_len);
    if (suite.flow == Flow::server_initiated) {
        out.key_id = Uuid::from_bytes(wire.subspan(ct_len));
    }
    return out;
}

namespace {

Secret make_secret(Bytes pq_ss, const qkd::QkdKey& qkd_key) {
    Secret secret;
    secret.pq_len = pq_ss.size();
    secret.bytes = std::move(pq_ss);
    // QKD material goes strictly last
    secret.bytes.insert(secret.bytes.end(), qkd_key.bytes.begin(), qkd_key.bytes.end());
    return secret;
}

}  // namespace

Context::Context(HybridSuite suite, QkdBinding binding)
    : suite_(std::move(suite)), binding_(std::move(binding)) {
    if (!binding_.transport) raise(Errc::invalid_config, "QKD binding needs a transport");
    if (suite_.flow == Flow::server_initiated && suite_.api != Api::etsi014) {
        raise(Errc::invalid_suite,
              "server-initiated flow requires the stateless ETSI 014 API");
    }
    binding_.qos.key_chunk_size = binding_.qkd_key_len;
    etsi014_ = std::make_unique<qkd::Etsi014Client>(binding_.transport,
                                                    binding_.qkd_key_len * 8);
    etsi004_ = std::make_unique<qkd::Etsi004Client>(binding_.transport);
}

Context::~Context() {
    try {
        close();
    } catch (...) {
        // teardown is best effort
    }
}

Context::Context(Context&& other) noexcept
    : suite_(std::move(other.suite_)),
      binding_(std::move(other.binding_)),
      etsi014_(std::move(other.etsi014_)),
      etsi004_(std::move(other.etsi004_)),
      keypair_(std::move(other.keypair_)),
      key_id_(std::move(other.key_id_)),
      cached_key_(std::move(other.cached_key_)),
      stream_open_(other.stream_open_) {
    other.stream_open_ = false;
}

const kem::Keypair& Context::keypair() const {
    if (!keypair_) raise(Errc::invalid_context, "context holds no keypair");
    return *keypair_;
}

PublicPayload Context::keygen(ByteView seed) {
    const kem::Kem& kem = suite_.kem();
    keypair_ = kem.keypair(seed);
    PublicPayload payload;
    payload.pk = keypair_->pk;
    if (suite_.flow == Flow::server_initiated) {
        // client only signals support; no QKD material is touched yet
        return payload;
    }
    if (suite_.api == Api::etsi014) {
        auto grants = etsi014_->get_key(binding_.peer_sae, 1);
        key_id_ = grants.at(0).first;
        cached_key_ = std::move(grants.at(0).second);
    } else {
        key_id_ = etsi004_->open_connect(qkd::Role::initiator, binding_.local_sae,
                                         binding_.peer_sae, binding_.qos);
        stream_open_ = true;
    }
    payload.key_id = key_id_;
    return payload;
}

qkd::QkdKey Context::fetch_stream_key_with_retry(const Uuid& stream_id) {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(binding_.retry.cap_ms);
    for (;;) {
        try {
            return etsi004_->get_key(stream_id, 0);
        } catch (const Error& e) {
            if (e.code() != Errc::peer_session_not_ready ||
                std::chrono::steady_clock::now() >= deadline) {
                throw;
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(binding_.retry.interval_ms));
    }
}

std::pair<Ciphertext, Secret> Context::encaps(ByteView payload_wire, ByteView randomness) {
    const kem::Kem& kem = suite_.kem();
    PublicPayload payload = PublicPayload::parse(suite_, payload_wire);

    qkd::QkdKey qkd_key;
    Ciphertext ct;
    if (suite_.flow == Flow::client_initiated) {
        if (suite_.api == Api::etsi014) {
            auto keys = etsi014_->get_key_with_ids(binding_.peer_sae, {*payload.key_id});
            qkd_key = std::move(keys.at(0));
        } else {
            key_id_ = etsi004_->open_connect(qkd::Role::responder, binding_.local_sae,
                                             binding_.peer_sae, binding_.qos,
                                             *payload.key_id);
            stream_open_ = true;
            qkd_key = fetch_stream_key_with_retry(*key_id_);
        }
    } else {
        // server-initiated: the encapsulating server is master of its own KME
        auto grants = etsi014_->get_key(binding_.peer_sae, 1);
        key_id_ = grants.at(0).first;
        qkd_key = std::move(grants.at(0).second);
        ct.key_id = key_id_;
    }

    auto pq = kem.encaps(payload.pk, randomness);
    ct.pq_ct = std::move(pq.ct);
    return {std::move(ct), make_secret(std::move(pq.ss), qkd_key)};
}

Secret Context::decaps(ByteView ciphertext_wire) {
    const kem::Kem& kem = suite_.kem();
    if (!keypair_) raise(Errc::invalid_context, "decaps requires the keygen keypair");
    Ciphertext ct = Ciphertext::parse(suite_, ciphertext_wire);

    qkd::QkdKey qkd_key;
    if (suite_.flow == Flow::client_initiated) {
        if (suite_.api == Api::etsi014) {
            if (!cached_key_) raise(Errc::invalid_context, "no cached QKD key from keygen");
            qkd_key = *cached_key_;  // zero QKD calls in this phase
        } else {
            if (!key_id_) raise(Errc::invalid_context, "no key stream from keygen");
            qkd_key = fetch_stream_key_with_retry(*key_id_);
        }
    } else {
        auto keys = etsi014_->get_key_with_ids(binding_.peer_sae, {*ct.key_id});
        qkd_key = std::move(keys.at(0));
    }

    Bytes pq_ss = kem.decaps(keypair_->sk, ct.pq_ct);
    return make_secret(std::move(pq_ss), qkd_key);
}

void Context::close() {
    if (stream_open_ && key_id_) {
        stream_open_ = false;
        etsi004_->close(*key_id_);
    }
}

QkdCallCounts expected_call_counts(const HybridSuite& suite) {
    if (suite.flow == Flow::server_initiated) return {0, 1, 1};
    if (suite.api == Api::etsi014) return {1, 1, 0};
    return {1, 2, 1};
}

}  // namespace qkdkem::hybrid
