#include "qkdkem/errors.hpp"

#include <array>
#include <utility>

namespace qkdkem {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 21> kTokens{{
    {Errc::unknown_suite, "UNKNOWN_SUITE"},
    {Errc::malformed_key, "MALFORMED_KEY"},
    {Errc::malformed_ciphertext, "MALFORMED_CIPHERTEXT"},
    {Errc::malformed_payload, "MALFORMED_PAYLOAD"},
    {Errc::invalid_suite, "INVALID_SUITE"},
    {Errc::invalid_config, "INVALID_CONFIG"},
    {Errc::invalid_request, "INVALID_REQUEST"},
    {Errc::invalid_context, "INVALID_CONTEXT"},
    {Errc::key_pool_exhausted, "KEY_POOL_EXHAUSTED"},
    {Errc::unknown_key_id, "UNKNOWN_KEY_ID"},
    {Errc::session_not_open, "SESSION_NOT_OPEN"},
    {Errc::session_already_open, "SESSION_ALREADY_OPEN"},
    {Errc::peer_session_not_ready, "PEER_SESSION_NOT_READY"},
    {Errc::transport, "TRANSPORT"},
    {Errc::timeout, "TIMEOUT"},
    {Errc::bind_failure, "BIND_FAILURE"},
    {Errc::unsupported_group, "UNSUPPORTED_GROUP"},
    {Errc::selected_group_not_offered, "SELECTED_GROUP_NOT_OFFERED"},
    {Errc::empty_preference, "EMPTY_PREFERENCE"},
    {Errc::empty_run, "EMPTY_RUN"},
    {Errc::io_error, "IO_ERROR"},
}};

}  // namespace

std::string_view errc_token(Errc code) {
    for (const auto& [c, token] : kTokens) {
        if (c == code) return token;
    }
    return "UNKNOWN";
}

Errc errc_from_token(std::string_view token) {
    for (const auto& [c, t] : kTokens) {
        if (t == token) return c;
    }
    return Errc::transport;
}

}  // namespace qkdkem
