#include "qkdkem/kme.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "qkdkem/crypto.hpp"
#include "qkdkem/errors.hpp"

namespace qkdkem::kme {

using nlohmann::json;

namespace {

// All pool and stream material is derived from the config seed through
// HMAC-SHA-256 with fixed labels (docs/PROTOCOL.md "Key derivation"), so a
// party holding the seed can regenerate the exact bytes the KMEs serve.
Bytes seed_key(uint64_t seed) { return crypto::be64(seed); }

Bytes label_msg(std::string_view label, uint32_t index) {
    Bytes msg(label.begin(), label.end());
    Bytes idx = crypto::be32(index);
    msg.insert(msg.end(), idx.begin(), idx.end());
    return msg;
}

Uuid derive_uuid(ByteView key, std::string_view label, uint32_t index) {
    auto digest = crypto::hmac_sha256(key, label_msg(label, index));
    Uuid id = Uuid::from_bytes(ByteView(digest).first(16));
    // RFC 4122 version 4 / variant bits
    id.bytes[6] = uint8_t((id.bytes[6] & 0x0F) | 0x40);
    id.bytes[8] = uint8_t((id.bytes[8] & 0x3F) | 0x80);
    return id;
}

int64_t now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

KmeStore::KmeStore(const KmeConfig& config) : config_(config), jitter_rng_(config.seed) {
    if (config_.latency.fixed_ms < 0 || config_.latency.jitter_ms < 0) {
        raise(Errc::invalid_config, "latency must be non-negative");
    }
    if (config_.qkd_key_len == 0 || config_.qkd_key_len > 4096) {
        raise(Errc::invalid_config, "qkd_key_len out of range");
    }
    Bytes sk = seed_key(config_.seed);
    pool_.reserve(config_.pool_size);
    for (uint32_t i = 0; i < config_.pool_size; ++i) {
        PoolKey pk;
        pk.id = derive_uuid(sk, "pool-id", i);
        pk.key = crypto::prf_expand(sk, label_msg("pool-key", i), config_.qkd_key_len);
        pool_index_.emplace(pk.id, pool_.size());
        pool_.push_back(std::move(pk));
    }
}

void KmeStore::append_ledger(const std::string& api, const std::string& op,
                             const Uuid& id, const std::string& party,
                             const std::string& sae) {
    LedgerEntry entry;
    entry.seq = ledger_.size();
    entry.api = api;
    entry.op = op;
    entry.key_id = id;
    entry.party = party;
    entry.sae = sae;
    entry.timestamp_us = now_us();
    ledger_.push_back(std::move(entry));
}

qkd::StatusReport KmeStore::status(const std::string& party,
                                   const std::string& peer_kme_id,
                                   const std::string& sae) const {
    (void)sae;
    std::scoped_lock lock(mutex_);
    qkd::StatusReport report;
    report.source_kme_id = party;
    report.target_kme_id = peer_kme_id;
    report.key_size_bits = config_.qkd_key_len * 8;
    report.stored_key_count =
        size_t(std::count_if(pool_.begin(), pool_.end(),
                             [](const PoolKey& k) { return k.state == KeyState::fresh; }));
    return report;
}

std::vector<std::pair<Uuid, qkd::QkdKey>> KmeStore::grant_keys(const std::string& party,
                                                               const std::string& sae,
                                                               size_t number) {
    std::scoped_lock lock(mutex_);
    std::vector<size_t> picks;
    picks.reserve(number);
    for (size_t i = 0; i < pool_.size() && picks.size() < number; ++i) {
        if (pool_[i].state == KeyState::fresh) picks.push_back(i);
    }
    if (picks.size() < number) {
        raise(Errc::key_pool_exhausted, "pool has fewer than requested fresh keys");
    }
    // keys transition to granted before any response leaves the store
    std::vector<std::pair<Uuid, qkd::QkdKey>> out;
    out.reserve(number);
    for (size_t idx : picks) {
        pool_[idx].state = KeyState::granted;
        append_ledger("etsi014", "GET_KEY", pool_[idx].id, party, sae);
        out.emplace_back(pool_[idx].id, qkd::QkdKey{pool_[idx].key});
    }
    return out;
}

std::vector<qkd::QkdKey> KmeStore::retire_keys(const std::string& party,
                                               const std::string& sae,
                                               const std::vector<Uuid>& ids) {
    std::scoped_lock lock(mutex_);
    std::vector<size_t> picks;
    picks.reserve(ids.size());
    for (const Uuid& id : ids) {
        auto it = pool_index_.find(id);
        if (it == pool_index_.end() || pool_[it->second].state != KeyState::granted) {
            raise(Errc::unknown_key_id, "key id was never granted or already retired: " +
                                            id.to_string());
        }
        picks.push_back(it->second);
    }
    std::vector<qkd::QkdKey> out;
    out.reserve(picks.size());
    for (size_t idx : picks) {
        pool_[idx].state = KeyState::retired;
        append_ledger("etsi014", "GET_KEY_WITH_IDS", pool_[idx].id, party, sae);
        out.push_back(qkd::QkdKey{pool_[idx].key});
    }
    return out;
}

Uuid KmeStore::open_connect(const std::string& party, const std::string& sae,
                            qkd::Role role, const qkd::QosSpec& qos,
                            const std::optional<Uuid>& key_stream_id) {
    if (qos.key_chunk_size != config_.qkd_key_len) {
        raise(Errc::invalid_request, "qos key_chunk_size must match the configured key size");
    }
    if (qos.timeout_ms <= 0) raise(Errc::invalid_request, "qos timeout must be positive");
    std::scoped_lock lock(mutex_);
    if (role == qkd::Role::initiator) {
        if (key_stream_id) {
            raise(Errc::invalid_request, "initiator must not supply a key_stream_id");
        }
        Bytes sk = seed_key(config_.seed);
        uint32_t counter = uint32_t(stream_counter_++);
        Uuid id = derive_uuid(sk, "stream-id", counter);
        StreamState state;
        auto seed = crypto::hmac_sha256(sk, label_msg("stream-seed", counter));
        state.stream_seed = seed;
        state.initiator_open = true;
        state.qos = qos;
        streams_.emplace(id, std::move(state));
        append_ledger("etsi004", "OPEN_CONNECT", id, party, sae);
        return id;
    }
    if (!key_stream_id) {
        raise(Errc::invalid_request, "responder must supply the initiator's key_stream_id");
    }
    auto it = streams_.find(*key_stream_id);
    if (it == streams_.end()) {
        raise(Errc::unknown_key_id, "no such key stream: " + key_stream_id->to_string());
    }
    if (it->second.responder_open) {
        raise(Errc::session_already_open, "stream already has a responder");
    }
    it->second.responder_open = true;
    append_ledger("etsi004", "OPEN_CONNECT", it->first, party, sae);
    return it->first;
}

qkd::QkdKey KmeStore::stream_key(const std::string& party, const std::string& sae,
                                 qkd::Role role, const Uuid& key_stream_id,
                                 uint32_t index) {
    std::scoped_lock lock(mutex_);
    auto it = streams_.find(key_stream_id);
    if (it == streams_.end()) {
        raise(Errc::session_not_open, "no such key stream: " + key_stream_id.to_string());
    }
    StreamState& st = it->second;
    bool own_open = role == qkd::Role::initiator ? st.initiator_open && !st.initiator_closed
                                                 : st.responder_open && !st.responder_closed;
    if (!own_open) raise(Errc::session_not_open, "stream not open at this end");
    // keys are released only once both parties have established their session
    bool peer_ready = role == qkd::Role::initiator ? st.responder_open : st.initiator_open;
    if (!peer_ready) {
        raise(Errc::peer_session_not_ready, "peer has not opened the stream yet");
    }
    qkd::QkdKey key{crypto::prf_expand(st.stream_seed, label_msg("stream-key", index),
                                       st.qos.key_chunk_size)};
    append_ledger("etsi004", "GET_KEY", key_stream_id, party, sae);
    return key;
}

void KmeStore::close_stream(const std::string& party, const std::string& sae,
                            qkd::Role role, const Uuid& key_stream_id) {
    std::scoped_lock lock(mutex_);
    auto it = streams_.find(key_stream_id);
    if (it == streams_.end()) {
        raise(Errc::session_not_open, "no such key stream: " + key_stream_id.to_string());
    }
    StreamState& st = it->second;
    if (role == qkd::Role::initiator) {
        if (!st.initiator_open || st.initiator_closed) {
            raise(Errc::session_not_open, "initiator end is not open");
        }
        st.initiator_closed = true;
    } else {
        if (!st.responder_open || st.responder_closed) {
            raise(Errc::session_not_open, "responder end is not open");
        }
        st.responder_closed = true;
    }
    append_ledger("etsi004", "CLOSE", key_stream_id, party, sae);
    // drop the stream once no end remains open
    bool initiator_done = st.initiator_closed;
    bool responder_done = !st.responder_open || st.responder_closed;
    if (initiator_done && responder_done) streams_.erase(it);
}

std::vector<LedgerEntry> KmeStore::ledger_snapshot() const {
    std::scoped_lock lock(mutex_);
    return ledger_;
}

uint64_t KmeStore::ledger_size() const {
    std::scoped_lock lock(mutex_);
    return ledger_.size();
}

PoolCounts KmeStore::pool_counts() const {
    std::scoped_lock lock(mutex_);
    PoolCounts counts;
    for (const PoolKey& k : pool_) {
        switch (k.state) {
            case KeyState::fresh: ++counts.fresh; break;
            case KeyState::granted: ++counts.granted; break;
            case KeyState::retired: ++counts.retired; break;
        }
    }
    return counts;
}

size_t KmeStore::stream_count() const {
    std::scoped_lock lock(mutex_);
    return streams_.size();
}

double KmeStore::sample_delay_ms() {
    std::scoped_lock lock(mutex_);
    double delay = config_.latency.fixed_ms;
    if (config_.latency.jitter_ms > 0) {
        std::uniform_real_distribution<double> dist(0.0, config_.latency.jitter_ms);
        delay += dist(jitter_rng_);
    }
    return delay;
}

// ---------------------------------------------------------------------------
// KmeEndpoint: wire routing
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    size_t pos = 0;
    while (pos < path.size()) {
        size_t next = path.find('/', pos);
        if (next == std::string_view::npos) next = path.size();
        if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

int http_status_for(Errc code) {
    switch (code) {
        case Errc::invalid_request:
        case Errc::invalid_config:
        case Errc::key_pool_exhausted:
            return 400;
        case Errc::unknown_key_id:
            return 404;
        case Errc::session_not_open:
        case Errc::session_already_open:
            return 409;
        case Errc::peer_session_not_ready:
            return 503;
        default:
            return 500;
    }
}

qkd::WireResponse error_response(Errc code, const std::string& message) {
    json body{{"code", std::string(errc_token(code))}, {"message", message}};
    return {http_status_for(code), body.dump()};
}

json parse_body(std::string_view body) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        raise(Errc::invalid_request, "request body is not a JSON object");
    }
    return parsed;
}

Uuid parse_uuid_field(const json& value, const char* what) {
    if (!value.is_string()) raise(Errc::invalid_request, std::string(what) + " must be a string");
    return Uuid::parse(value.get<std::string>());
}

}  // namespace

KmeEndpoint::KmeEndpoint(std::shared_ptr<KmeStore> store, std::string id,
                         std::string peer_id)
    : store_(std::move(store)), id_(std::move(id)), peer_id_(std::move(peer_id)) {}

qkd::WireResponse KmeEndpoint::handle(std::string_view method, std::string_view path,
                                      std::string_view body) {
    double delay = store_->sample_delay_ms();
    if (delay > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }
    try {
        return dispatch(method, path, body);
    } catch (const Error& e) {
        return error_response(e.code(), e.what());
    } catch (const std::exception& e) {
        return error_response(Errc::io_error, e.what());
    }
}

qkd::WireResponse KmeEndpoint::dispatch(std::string_view method, std::string_view path,
                                        std::string_view body) {
    auto parts = split_path(path);
    // /api/v1/keys/{SAE}/status | enc_keys | dec_keys
    if (parts.size() == 5 && parts[0] == "api" && parts[1] == "v1" && parts[2] == "keys") {
        const std::string& sae = parts[3];
        const std::string& leaf = parts[4];
        if (leaf == "status" && method == "GET") {
            auto report = store_->status(id_, peer_id_, sae);
            json out{{"source_KME_ID", report.source_kme_id},
                     {"target_KME_ID", report.target_kme_id},
                     {"stored_key_count", report.stored_key_count},
                     {"key_size", report.key_size_bits}};
            return {200, out.dump()};
        }
        if (leaf == "enc_keys" && method == "POST") {
            json req = body.empty() ? json::object() : parse_body(body);
            int64_t number = 1;
            if (req.contains("number")) {
                if (!req["number"].is_number_integer()) {
                    raise(Errc::invalid_request, "number must be an integer");
                }
                number = req["number"].get<int64_t>();
                if (number < 0) raise(Errc::invalid_request, "number must be non-negative");
            }
            if (req.contains("size")) {
                if (!req["size"].is_number_integer() ||
                    req["size"].get<int64_t>() != int64_t(store_->config().qkd_key_len * 8)) {
                    raise(Errc::invalid_request, "unsupported key size");
                }
            }
            auto grants = store_->grant_keys(id_, sae, size_t(number));
            json keys = json::array();
            for (const auto& [id, key] : grants) {
                keys.push_back({{"key_ID", id.to_string()}, {"key", base64_encode(key.bytes)}});
            }
            return {200, json{{"keys", keys}}.dump()};
        }
        if (leaf == "dec_keys" && method == "POST") {
            json req = parse_body(body);
            if (!req.contains("key_IDs") || !req["key_IDs"].is_array()) {
                raise(Errc::invalid_request, "key_IDs array required");
            }
            std::vector<Uuid> ids;
            for (const auto& item : req["key_IDs"]) {
                if (!item.is_object() || !item.contains("key_ID")) {
                    raise(Errc::invalid_request, "key_IDs entries must carry key_ID");
                }
                ids.push_back(parse_uuid_field(item["key_ID"], "key_ID"));
            }
            auto keys = store_->retire_keys(id_, sae, ids);
            json out_keys = json::array();
            for (size_t i = 0; i < keys.size(); ++i) {
                out_keys.push_back({{"key_ID", ids[i].to_string()},
                                    {"key", base64_encode(keys[i].bytes)}});
            }
            return {200, json{{"keys", out_keys}}.dump()};
        }
    }
    // /api/v1/kms/sessions
    if (parts.size() == 4 && parts[0] == "api" && parts[1] == "v1" && parts[2] == "kms" &&
        parts[3] == "sessions" && method == "POST") {
        json req = parse_body(body);
        if (!req.contains("method") || !req["method"].is_string()) {
            raise(Errc::invalid_request, "method field required");
        }
        std::string op = req["method"].get<std::string>();
        if (!req.contains("role") || !req["role"].is_string()) {
            raise(Errc::invalid_request, "role field required");
        }
        qkd::Role role = qkd::role_from_name(req["role"].get<std::string>());
        if (op == "OPEN_CONNECT") {
            qkd::QosSpec qos;
            if (req.contains("qos")) {
                const json& q = req["qos"];
                if (!q.is_object()) raise(Errc::invalid_request, "qos must be an object");
                qos.key_chunk_size = q.value("key_chunk_size", qos.key_chunk_size);
                qos.timeout_ms = q.value("timeout", qos.timeout_ms);
                qos.max_bps = q.value("max_bps", qos.max_bps);
            }
            std::optional<Uuid> stream_id;
            if (req.contains("key_stream_id") && !req["key_stream_id"].is_null()) {
                stream_id = parse_uuid_field(req["key_stream_id"], "key_stream_id");
            }
            std::string source = req.value("source", "");
            std::string destination = req.value("destination", "");
            (void)destination;
            Uuid id = store_->open_connect(id_, source, role, qos, stream_id);
            return {200, json{{"key_stream_id", id.to_string()}}.dump()};
        }
        if (op == "GET_KEY") {
            if (!req.contains("key_stream_id")) {
                raise(Errc::invalid_request, "key_stream_id required");
            }
            Uuid id = parse_uuid_field(req["key_stream_id"], "key_stream_id");
            int64_t index = req.value("index", 0);
            if (index < 0) raise(Errc::invalid_request, "index must be non-negative");
            auto key = store_->stream_key(id_, "", role, id, uint32_t(index));
            json out{{"key_stream_id", id.to_string()},
                     {"index", index},
                     {"key", base64_encode(key.bytes)}};
            return {200, out.dump()};
        }
        if (op == "CLOSE") {
            if (!req.contains("key_stream_id")) {
                raise(Errc::invalid_request, "key_stream_id required");
            }
            Uuid id = parse_uuid_field(req["key_stream_id"], "key_stream_id");
            store_->close_stream(id_, "", role, id);
            return {200, json{{"key_stream_id", id.to_string()}, {"closed", true}}.dump()};
        }
        raise(Errc::invalid_request, "unknown session method: " + op);
    }
    raise(Errc::invalid_request, "no such route: " + std::string(path));
}

KmePair kme_spawn(const KmeConfig& config) {
    KmePair pair;
    pair.store = std::make_shared<KmeStore>(config);
    pair.a = std::make_shared<KmeEndpoint>(pair.store, config.kme_a_id, config.kme_b_id);
    pair.b = std::make_shared<KmeEndpoint>(pair.store, config.kme_b_id, config.kme_a_id);
    return pair;
}

}  // namespace qkdkem::kme
