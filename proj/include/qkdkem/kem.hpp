#pragma once

#include <memory>
#include <string_view>

#include "qkdkem/bytes.hpp"

namespace qkdkem::kem {

struct Keypair {
    Bytes pk;
    Bytes sk;
};

struct EncapsResult {
    Bytes ct;
    Bytes ss;
};

/// Key-encapsulation contract housing the post-quantum component. All
/// operations are deterministic in their inputs; callers supply seeds and
/// randomness explicitly so protocol runs can be replayed.
class Kem {
public:
    virtual ~Kem() = default;

    virtual std::string_view name() const = 0;
    virtual size_t pk_len() const = 0;
    virtual size_t sk_len() const = 0;
    virtual size_t ct_len() const = 0;
    virtual size_t ss_len() const = 0;

    // seed must be exactly 32 bytes
    virtual Keypair keypair(ByteView seed) const = 0;
    virtual EncapsResult encaps(ByteView pk, ByteView randomness) const = 0;
    virtual Bytes decaps(ByteView sk, ByteView ct) const = 0;
};

// Process-wide suite registry. "mock256" is registered at startup; adapters
// for real PQC suites plug in through the same call without touching the
// hybrid or handshake layers.
void register_kem(std::unique_ptr<Kem> suite);  // throws invalid_config on duplicate name
const Kem& require_kem(std::string_view name);  // throws unknown_suite
bool kem_registered(std::string_view name);

// The built-in test suite. NOT secure: sk = seed, pk = SHA-256(sk),
// ct = randomness, ss = SHA-256(pk || ct). Every value is recomputable by an
// external SHA-256 oracle, which is the point.
std::unique_ptr<Kem> make_mock256();

}  // namespace qkdkem::kem
