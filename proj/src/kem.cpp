#include "qkdkem/kem.hpp"

#include <map>
#include <mutex>

#include "qkdkem/crypto.hpp"
#include "qkdkem/errors.hpp"

namespace qkdkem::kem {

namespace {

// Test-only construction, labeled as such in the docs: sk = seed,
// pk = SHA-256(sk), ct = randomness, ss = SHA-256(pk || ct). Deliberately
// transparent so every downstream value can be recomputed by an external
// SHA-256 oracle.
class Mock256 final : public Kem {
public:
    std::string_view name() const override { return "mock256"; }
    size_t pk_len() const override { return 32; }
    size_t sk_len() const override { return 32; }
    size_t ct_len() const override { return 32; }
    size_t ss_len() const override { return 32; }

    Keypair keypair(ByteView seed) const override {
        if (seed.size() != 32) raise(Errc::malformed_key, "mock256 seed must be 32 bytes");
        Keypair kp;
        kp.sk.assign(seed.begin(), seed.end());
        auto pk = crypto::sha256(kp.sk);
        kp.pk.assign(pk.begin(), pk.end());
        return kp;
    }

    EncapsResult encaps(ByteView pk, ByteView randomness) const override {
        if (pk.size() != pk_len()) raise(Errc::malformed_key, "mock256 pk must be 32 bytes");
        if (randomness.size() != 32) {
            raise(Errc::malformed_key, "mock256 randomness must be 32 bytes");
        }
        EncapsResult out;
        out.ct.assign(randomness.begin(), randomness.end());
        auto ss = crypto::sha256(concat(pk, out.ct));
        out.ss.assign(ss.begin(), ss.end());
        return out;
    }

    Bytes decaps(ByteView sk, ByteView ct) const override {
        if (sk.size() != sk_len()) raise(Errc::malformed_key, "mock256 sk must be 32 bytes");
        if (ct.size() != ct_len()) {
            raise(Errc::malformed_ciphertext, "mock256 ct must be 32 bytes");
        }
        auto pk = crypto::sha256(sk);
        auto ss = crypto::sha256(concat(pk, ct));
        return Bytes(ss.begin(), ss.end());
    }
};

struct Registry {
    std::mutex mutex;
    std::map<std::string, std::unique_ptr<Kem>, std::less<>> suites;

    Registry() {
        auto mock = make_mock256();
        suites.emplace(std::string(mock->name()), std::move(mock));
    }
};

Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace

std::unique_ptr<Kem> make_mock256() { return std::make_unique<Mock256>(); }

void register_kem(std::unique_ptr<Kem> suite) {
    auto& r = registry();
    std::scoped_lock lock(r.mutex);
    std::string name(suite->name());
    if (r.suites.contains(name)) {
        raise(Errc::invalid_config, "KEM suite already registered: " + name);
    }
    r.suites.emplace(std::move(name), std::move(suite));
}

const Kem& require_kem(std::string_view name) {
    auto& r = registry();
    std::scoped_lock lock(r.mutex);
    auto it = r.suites.find(name);
    if (it == r.suites.end()) {
        raise(Errc::unknown_suite, "no such KEM suite: " + std::string(name));
    }
    return *it->second;
}

bool kem_registered(std::string_view name) {
    auto& r = registry();
    std::scoped_lock lock(r.mutex);
    return r.suites.find(name) != r.suites.end();
}

}  // namespace qkdkem::kem
