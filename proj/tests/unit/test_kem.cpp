#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "qkdkem/errors.hpp"
#include "qkdkem/kem.hpp"
#include "ref_crypto.hpp"

using namespace qkdkem;

namespace {

// Golden values computed with an external SHA-256 oracle before the library
// was written; the reference implementation below must agree with them too.
constexpr const char* kPkZeroSeed =
    "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925";
constexpr const char* kPkFfSeed =
    "af9613760f72635fbdb44a5a0a63c39f12af30f950a6ee5c971be188e89c4051";
constexpr const char* kSsZeroZero =
    "97de335e8c5f43af0da602fa18821f7d0561ba676cc66b11c9fb21eeeef8a690";
constexpr const char* kPkOneSeed =
    "72cd6e8422c407fb6d098690f1130b7ded7ec2f7f5e1d30bd9d521f015363793";
constexpr const char* kSsOneTwo =
    "29fd1a322280c42d7cef33635db94e7e40087aeef4f27fbaf9f135d0d0f0eb02";

Bytes rand_bytes(std::mt19937_64& rng, size_t n) {
    Bytes out(n);
    for (auto& b : out) b = uint8_t(rng());
    return out;
}

}  // namespace

TEST_CASE("reference SHA-256 matches published vectors") {
    CHECK(refcrypto::hex(refcrypto::sha256(refcrypto::Bytes{})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    refcrypto::Bytes abc{'a', 'b', 'c'};
    CHECK(refcrypto::hex(refcrypto::sha256(abc)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::string two_block = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
    refcrypto::Bytes tb(two_block.begin(), two_block.end());
    CHECK(refcrypto::hex(refcrypto::sha256(tb)) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    refcrypto::Bytes million(1000000, uint8_t('a'));
    CHECK(refcrypto::hex(refcrypto::sha256(million)) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("reference HMAC-SHA-256 matches RFC 4231 vectors") {
    refcrypto::Bytes key1(20, 0x0b);
    std::string msg1 = "Hi There";
    CHECK(refcrypto::hex(refcrypto::hmac_sha256(key1, refcrypto::Bytes(msg1.begin(),
                                                                       msg1.end()))) ==
          "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    std::string key2 = "Jefe";
    std::string msg2 = "what do ya want for nothing?";
    CHECK(refcrypto::hex(refcrypto::hmac_sha256(
              refcrypto::Bytes(key2.begin(), key2.end()),
              refcrypto::Bytes(msg2.begin(), msg2.end()))) ==
          "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("mock256 keypair matches golden vectors") {
    const kem::Kem& mock = kem::require_kem("mock256");
    CHECK(mock.pk_len() == 32);
    CHECK(mock.sk_len() == 32);
    CHECK(mock.ct_len() == 32);
    CHECK(mock.ss_len() == 32);

    auto kp0 = mock.keypair(repeated(0x00, 32));
    CHECK(to_hex(kp0.sk) == to_hex(repeated(0x00, 32)));
    CHECK(to_hex(kp0.pk) == kPkZeroSeed);

    auto kpF = mock.keypair(repeated(0xFF, 32));
    CHECK(to_hex(kpF.pk) == kPkFfSeed);

    auto kp1 = mock.keypair(repeated(0x01, 32));
    CHECK(to_hex(kp1.pk) == kPkOneSeed);
}

TEST_CASE("mock256 encaps/decaps match golden vectors and are deterministic") {
    const kem::Kem& mock = kem::require_kem("mock256");
    auto kp = mock.keypair(repeated(0x00, 32));

    auto enc = mock.encaps(kp.pk, repeated(0x00, 32));
    CHECK(to_hex(enc.ct) == to_hex(repeated(0x00, 32)));
    CHECK(to_hex(enc.ss) == kSsZeroZero);

    auto enc_again = mock.encaps(kp.pk, repeated(0x00, 32));
    CHECK(enc_again.ct == enc.ct);
    CHECK(enc_again.ss == enc.ss);

    Bytes ss = mock.decaps(kp.sk, enc.ct);
    CHECK(ss == enc.ss);
    CHECK(mock.decaps(kp.sk, enc.ct) == ss);

    auto kp1 = mock.keypair(repeated(0x01, 32));
    auto enc1 = mock.encaps(kp1.pk, repeated(0x02, 32));
    CHECK(to_hex(enc1.ss) == kSsOneTwo);
    CHECK(mock.decaps(kp1.sk, enc1.ct) == enc1.ss);
}

TEST_CASE("mock256 agrees with the independent oracle on random cases") {
    const kem::Kem& mock = kem::require_kem("mock256");
    std::mt19937_64 rng(0xA11CE);
    for (int i = 0; i < 100; ++i) {
        Bytes seed = rand_bytes(rng, 32);
        Bytes randomness = rand_bytes(rng, 32);
        auto kp = mock.keypair(seed);
        CHECK(kp.pk == oracles::mock256_pk(seed));
        auto enc = mock.encaps(kp.pk, randomness);
        CHECK(enc.ss == oracles::mock256_ss(kp.pk, enc.ct));
        CHECK(mock.decaps(kp.sk, enc.ct) == enc.ss);
    }
}

TEST_CASE("mock256 round trip holds over 1000 random pairs") {
    const kem::Kem& mock = kem::require_kem("mock256");
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        auto kp = mock.keypair(rand_bytes(rng, 32));
        auto enc = mock.encaps(kp.pk, rand_bytes(rng, 32));
        CHECK(enc.ct.size() == mock.ct_len());
        CHECK(enc.ss.size() == mock.ss_len());
        REQUIRE(mock.decaps(kp.sk, enc.ct) == enc.ss);
    }
}

TEST_CASE("kem error paths") {
    CHECK_THROWS_WITH_AS(kem::require_kem("nosuchkem"), doctest::Contains("UNKNOWN_SUITE"),
                         Error);
    const kem::Kem& mock = kem::require_kem("mock256");
    CHECK_THROWS_AS(mock.keypair(repeated(0, 31)), Error);
    CHECK_THROWS_AS(mock.encaps(repeated(0, 31), repeated(0, 32)), Error);
    auto kp = mock.keypair(repeated(0, 32));
    CHECK_THROWS_AS(mock.decaps(kp.sk, Bytes{}), Error);
    try {
        mock.decaps(kp.sk, Bytes{});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_ciphertext);
    }
    try {
        mock.encaps(repeated(0, 31), repeated(0, 32));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_key);
    }
}

TEST_CASE("registry rejects duplicates and reports membership") {
    CHECK(kem::kem_registered("mock256"));
    CHECK_FALSE(kem::kem_registered("nosuchkem"));
    CHECK_THROWS_AS(kem::register_kem(kem::make_mock256()), Error);
}
