#include "qkdkem/qkd_client.hpp"

#include <nlohmann/json.hpp>

#include "qkdkem/errors.hpp"

namespace qkdkem::qkd {

using nlohmann::json;

std::string_view role_name(Role role) {
    return role == Role::initiator ? "initiator" : "responder";
}

Role role_from_name(std::string_view name) {
    if (name == "initiator") return Role::initiator;
    if (name == "responder") return Role::responder;
    raise(Errc::invalid_request, "role must be initiator or responder");
}

namespace {

// Non-2xx responses carry {"code","message"}; rethrow with the same code so
// wire and in-process callers see identical errors.
[[noreturn]] void rethrow_wire_error(const WireResponse& response) {
    json body = json::parse(response.body, nullptr, false);
    if (body.is_object() && body.contains("code") && body["code"].is_string()) {
        raise(errc_from_token(body["code"].get<std::string>()),
              body.value("message", "KME error"));
    }
    raise(Errc::transport, "KME returned status " + std::to_string(response.status));
}

json expect_ok(const WireResponse& response) {
    if (response.status < 200 || response.status >= 300) rethrow_wire_error(response);
    json body = json::parse(response.body, nullptr, false);
    if (body.is_discarded()) raise(Errc::transport, "KME returned malformed JSON");
    return body;
}

std::vector<std::pair<QkdKeyId, QkdKey>> parse_keys(const json& body) {
    if (!body.contains("keys") || !body["keys"].is_array()) {
        raise(Errc::transport, "KME response missing keys array");
    }
    std::vector<std::pair<QkdKeyId, QkdKey>> out;
    for (const auto& item : body["keys"]) {
        if (!item.contains("key_ID") || !item.contains("key")) {
            raise(Errc::transport, "KME key entry missing key_ID/key");
        }
        out.emplace_back(Uuid::parse(item["key_ID"].get<std::string>()),
                         QkdKey{base64_decode(item["key"].get<std::string>())});
    }
    return out;
}

}  // namespace

Etsi014Client::Etsi014Client(std::shared_ptr<KmeTransport> transport, size_t key_size_bits)
    : transport_(std::move(transport)), key_size_bits_(key_size_bits) {}

StatusReport Etsi014Client::get_status(const std::string& peer_sae) {
    auto body = expect_ok(transport_->get("/api/v1/keys/" + peer_sae + "/status"));
    StatusReport report;
    report.source_kme_id = body.value("source_KME_ID", "");
    report.target_kme_id = body.value("target_KME_ID", "");
    report.stored_key_count = body.value("stored_key_count", size_t{0});
    report.key_size_bits = body.value("key_size", size_t{0});
    return report;
}

std::vector<std::pair<QkdKeyId, QkdKey>> Etsi014Client::get_key(const std::string& peer_sae,
                                                                size_t number) {
    json req{{"number", number}, {"size", key_size_bits_}};
    auto body = expect_ok(
        transport_->post("/api/v1/keys/" + peer_sae + "/enc_keys", req.dump()));
    return parse_keys(body);
}

std::vector<QkdKey> Etsi014Client::get_key_with_ids(const std::string& peer_sae,
                                                    const std::vector<QkdKeyId>& ids) {
    json id_list = json::array();
    for (const auto& id : ids) id_list.push_back({{"key_ID", id.to_string()}});
    json req{{"key_IDs", id_list}};
    auto body = expect_ok(
        transport_->post("/api/v1/keys/" + peer_sae + "/dec_keys", req.dump()));
    auto pairs = parse_keys(body);
    std::vector<QkdKey> out;
    out.reserve(pairs.size());
    for (auto& [id, key] : pairs) out.push_back(std::move(key));
    return out;
}

Etsi004Client::Etsi004Client(std::shared_ptr<KmeTransport> transport)
    : transport_(std::move(transport)) {}

QkdKeyId Etsi004Client::open_connect(Role role, const std::string& source_sae,
                                     const std::string& dest_sae, const QosSpec& qos,
                                     std::optional<QkdKeyId> key_stream_id) {
    json req{{"method", "OPEN_CONNECT"},
             {"role", std::string(role_name(role))},
             {"source", source_sae},
             {"destination", dest_sae},
             {"qos",
              {{"key_chunk_size", qos.key_chunk_size},
               {"timeout", qos.timeout_ms},
               {"max_bps", qos.max_bps}}}};
    if (key_stream_id) {
        req["key_stream_id"] = key_stream_id->to_string();
    } else {
        req["key_stream_id"] = nullptr;
    }
    auto body = expect_ok(transport_->post("/api/v1/kms/sessions", req.dump()));
    if (!body.contains("key_stream_id")) {
        raise(Errc::transport, "OPEN_CONNECT response missing key_stream_id");
    }
    Uuid id = Uuid::parse(body["key_stream_id"].get<std::string>());
    open_streams_[id] = role;
    return id;
}

QkdKey Etsi004Client::get_key(const QkdKeyId& key_stream_id, uint32_t index) {
    auto it = open_streams_.find(key_stream_id);
    if (it == open_streams_.end()) {
        raise(Errc::session_not_open, "stream not open in this context");
    }
    json req{{"method", "GET_KEY"},
             {"role", std::string(role_name(it->second))},
             {"key_stream_id", key_stream_id.to_string()},
             {"index", index}};
    auto body = expect_ok(transport_->post("/api/v1/kms/sessions", req.dump()));
    if (!body.contains("key")) raise(Errc::transport, "GET_KEY response missing key");
    return QkdKey{base64_decode(body["key"].get<std::string>())};
}

void Etsi004Client::close(const QkdKeyId& key_stream_id) {
    auto it = open_streams_.find(key_stream_id);
    if (it == open_streams_.end()) {
        raise(Errc::session_not_open, "stream not open in this context");
    }
    json req{{"method", "CLOSE"},
             {"role", std::string(role_name(it->second))},
             {"key_stream_id", key_stream_id.to_string()}};
    // forget the local binding regardless of the server-side outcome
    open_streams_.erase(it);
    expect_ok(transport_->post("/api/v1/kms/sessions", req.dump()));
}

bool Etsi004Client::has_open_stream(const QkdKeyId& key_stream_id) const {
    return open_streams_.contains(key_stream_id);
}

}  // namespace qkdkem::qkd
