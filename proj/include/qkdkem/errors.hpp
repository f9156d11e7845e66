#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkdkem {

// Error taxonomy shared by every layer. The names double as wire tokens on
// the KME's JSON error responses so a client can rethrow the same code.
enum class Errc {
    unknown_suite,
    malformed_key,
    malformed_ciphertext,
    malformed_payload,
    invalid_suite,
    invalid_config,
    invalid_request,
    invalid_context,
    key_pool_exhausted,
    unknown_key_id,
    session_not_open,
    session_already_open,
    peer_session_not_ready,
    transport,
    timeout,
    bind_failure,
    unsupported_group,
    selected_group_not_offered,
    empty_preference,
    empty_run,
    io_error,
};

// Stable uppercase token, e.g. "UNKNOWN_KEY_ID".
std::string_view errc_token(Errc code);

// Inverse of errc_token. Unrecognized tokens map to Errc::transport so a
// client never crashes on a foreign error body.
Errc errc_from_token(std::string_view token);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_token(code)) + ": " + message),
          code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace qkdkem
