#include <doctest.h>

#include <functional>

#include <random>

#include "oracles.hpp"
#include "qkdkem/crypto.hpp"
#include "qkdkem/errors.hpp"
#include "qkdkem/hybrid.hpp"
#include "qkdkem/kme.hpp"

using namespace qkdkem;
using hybrid::Api;
using hybrid::Flow;

namespace {

struct Rig {
    kme::KmePair pair;
    hybrid::QkdBinding binding_a;  // client / initiator side
    hybrid::QkdBinding binding_b;  // server / responder side

    explicit Rig(size_t pool_size, uint64_t seed = 0) {
        kme::KmeConfig config;
        config.pool_size = pool_size;
        config.seed = seed;
        pair = kme::kme_spawn(config);
        binding_a.transport = std::make_shared<kme::InProcessTransport>(pair.a);
        binding_a.local_sae = "sae-client";
        binding_a.peer_sae = "sae-server";
        binding_b.transport = std::make_shared<kme::InProcessTransport>(pair.b);
        binding_b.local_sae = "sae-server";
        binding_b.peer_sae = "sae-client";
    }
};

Bytes rand_bytes(std::mt19937_64& rng, size_t n) {
    Bytes out(n);
    for (auto& b : out) b = uint8_t(rng());
    return out;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::io_error;
}

// A second registered suite with unusual lengths; proves the registry is
// extensible without touching the hybrid layer. pk = H(sk) || H(H(sk)),
// ss = H(pk || ct) || H(ct || pk).
class WideKem final : public kem::Kem {
public:
    std::string_view name() const override { return "mockwide"; }
    size_t pk_len() const override { return 64; }
    size_t sk_len() const override { return 32; }
    size_t ct_len() const override { return 32; }
    size_t ss_len() const override { return 64; }

    kem::Keypair keypair(ByteView seed) const override {
        if (seed.size() != 32) raise(Errc::malformed_key, "seed must be 32 bytes");
        kem::Keypair kp;
        kp.sk.assign(seed.begin(), seed.end());
        kp.pk = derive_pk(kp.sk);
        return kp;
    }
    kem::EncapsResult encaps(ByteView pk, ByteView randomness) const override {
        if (pk.size() != pk_len()) raise(Errc::malformed_key, "bad pk length");
        if (randomness.size() != 32) raise(Errc::malformed_key, "bad randomness length");
        kem::EncapsResult out;
        out.ct.assign(randomness.begin(), randomness.end());
        out.ss = derive_ss(to_bytes(pk), out.ct);
        return out;
    }
    Bytes decaps(ByteView sk, ByteView ct) const override {
        if (sk.size() != sk_len()) raise(Errc::malformed_key, "bad sk length");
        if (ct.size() != ct_len()) raise(Errc::malformed_ciphertext, "bad ct length");
        return derive_ss(derive_pk(to_bytes(sk)), to_bytes(ct));
    }

private:
    static Bytes derive_pk(const Bytes& sk) {
        auto h1 = crypto::sha256(sk);
        auto h2 = crypto::sha256(h1);
        Bytes pk(h1.begin(), h1.end());
        pk.insert(pk.end(), h2.begin(), h2.end());
        return pk;
    }
    static Bytes derive_ss(const Bytes& pk, const Bytes& ct) {
        auto front = crypto::sha256(concat(pk, ct));
        auto back = crypto::sha256(concat(ct, pk));
        Bytes ss(front.begin(), front.end());
        ss.insert(ss.end(), back.begin(), back.end());
        return ss;
    }
};

void ensure_wide_kem() {
    if (!kem::kem_registered("mockwide")) {
        kem::register_kem(std::make_unique<WideKem>());
    }
}

int count_qkd_entries(const std::vector<kme::LedgerEntry>& ledger, uint64_t from,
                      uint64_t to) {
    int n = 0;
    for (const auto& e : ledger) {
        if (e.seq >= from && e.seq < to && e.op != "CLOSE") ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("suite constraint: server-initiated requires ETSI 014") {
    CHECK(code_of([] {
              hybrid::HybridSuite::make("mock256", Api::etsi004, Flow::server_initiated,
                                        0x303F);
          }) == Errc::invalid_suite);
    CHECK_NOTHROW(
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::server_initiated, 0x303E));
    CHECK(code_of([] {
              hybrid::HybridSuite::make("nosuchkem", Api::etsi014, Flow::client_initiated,
                                        1);
          }) == Errc::unknown_suite);
}

TEST_CASE("keygen payload shapes and QKD side effects per flow") {
    SUBCASE("client-initiated 014: payload pk||key_id, one grant") {
        Rig rig(4);
        auto suite =
            hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
        hybrid::Context alice(suite, rig.binding_a);
        auto payload = alice.keygen(repeated(0, 32));
        CHECK(payload.encode().size() == 48);
        REQUIRE(payload.key_id.has_value());
        auto ledger = rig.pair.store->ledger_snapshot();
        REQUIRE(ledger.size() == 1);
        CHECK(ledger[0].op == "GET_KEY");
        CHECK(ledger[0].key_id == *payload.key_id);
    }
    SUBCASE("client-initiated 004: payload pk||stream_id, one open") {
        Rig rig(0);
        auto suite =
            hybrid::HybridSuite::make("mock256", Api::etsi004, Flow::client_initiated, 0x303D);
        hybrid::Context alice(suite, rig.binding_a);
        auto payload = alice.keygen(repeated(0, 32));
        CHECK(payload.encode().size() == 48);
        auto ledger = rig.pair.store->ledger_snapshot();
        REQUIRE(ledger.size() == 1);
        CHECK(ledger[0].op == "OPEN_CONNECT");
        alice.close();
        CHECK(rig.pair.store->ledger_snapshot().back().op == "CLOSE");
    }
    SUBCASE("server-initiated: pk only, zero QKD calls") {
        Rig rig(4);
        auto suite =
            hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::server_initiated, 0x303E);
        hybrid::Context client(suite, rig.binding_a);
        auto payload = client.keygen(repeated(0, 32));
        CHECK(payload.encode().size() == 32);
        CHECK_FALSE(payload.key_id.has_value());
        CHECK(rig.pair.store->ledger_snapshot().empty());
    }
}

TEST_CASE("client-initiated 014 end to end, verified against the oracles") {
    Rig rig(4);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
    hybrid::Context alice(suite, rig.binding_a);
    hybrid::Context bob(suite, rig.binding_b);

    Bytes seed = repeated(0x00, 32);
    Bytes randomness = repeated(0x05, 32);
    auto payload = alice.keygen(seed);
    auto [ct, bob_secret] = bob.encaps(payload.encode(), randomness);

    // ciphertext carries no key id in this flow
    CHECK(ct.encode().size() == 32);
    CHECK_FALSE(ct.key_id.has_value());

    uint64_t before_decaps = rig.pair.store->ledger_size();
    auto alice_secret = alice.decaps(ct.encode());
    // decapsulation makes zero QKD API calls in this flow
    CHECK(rig.pair.store->ledger_size() == before_decaps);

    REQUIRE(alice_secret.bytes == bob_secret.bytes);
    CHECK(alice_secret.bytes.size() == 64);
    CHECK(alice_secret.pq_len == 32);

    // PQ half equals the independent KEM oracle; QKD half is the granted pool
    // key (first fresh key, index 0), bytes strictly last
    Bytes pk = oracles::mock256_pk(seed);
    CHECK(to_bytes(alice_secret.pq_part()) == oracles::mock256_ss(pk, ct.pq_ct));
    CHECK(to_bytes(alice_secret.qkd_part()) == oracles::kme_pool_key(0, 0, 32));

    // the ledger pairs the grant with exactly one retirement of the same id
    auto ledger = rig.pair.store->ledger_snapshot();
    REQUIRE(ledger.size() == 2);
    CHECK(ledger[0].op == "GET_KEY");
    CHECK(ledger[1].op == "GET_KEY_WITH_IDS");
    CHECK(ledger[0].key_id == ledger[1].key_id);
}

TEST_CASE("client-initiated 004 end to end with call placement {1,2,1}") {
    Rig rig(0);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi004, Flow::client_initiated, 0x303D);
    hybrid::Context alice(suite, rig.binding_a);
    hybrid::Context bob(suite, rig.binding_b);
    auto& store = *rig.pair.store;

    uint64_t m0 = store.ledger_size();
    auto payload = alice.keygen(repeated(1, 32));
    uint64_t m1 = store.ledger_size();
    auto [ct, bob_secret] = bob.encaps(payload.encode(), repeated(2, 32));
    uint64_t m2 = store.ledger_size();
    auto alice_secret = alice.decaps(ct.encode());
    uint64_t m3 = store.ledger_size();

    auto ledger = store.ledger_snapshot();
    CHECK(count_qkd_entries(ledger, m0, m1) == 1);  // OPEN_CONNECT
    CHECK(count_qkd_entries(ledger, m1, m2) == 2);  // OPEN_CONNECT + GET_KEY
    CHECK(count_qkd_entries(ledger, m2, m3) == 1);  // GET_KEY

    REQUIRE(alice_secret.bytes == bob_secret.bytes);
    CHECK(to_bytes(alice_secret.qkd_part()) == oracles::kme_stream_key(0, 0, 0, 32));

    // teardown closes both ends of the stream
    alice.close();
    bob.close();
    int closes = 0;
    for (const auto& e : store.ledger_snapshot()) {
        if (e.op == "CLOSE") ++closes;
    }
    CHECK(closes == 2);
    CHECK(store.stream_count() == 0);
}

TEST_CASE("server-initiated 014 end to end with call placement {0,1,1}") {
    Rig rig(4);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::server_initiated, 0x303E);
    hybrid::Context client(suite, rig.binding_a);
    hybrid::Context server(suite, rig.binding_b);
    auto& store = *rig.pair.store;

    uint64_t m0 = store.ledger_size();
    auto payload = client.keygen(repeated(3, 32));
    uint64_t m1 = store.ledger_size();
    auto [ct, server_secret] = server.encaps(payload.encode(), repeated(4, 32));
    uint64_t m2 = store.ledger_size();

    // the key id rides the ciphertext
    CHECK(ct.encode().size() == 48);
    REQUIRE(ct.key_id.has_value());

    auto client_secret = client.decaps(ct.encode());
    uint64_t m3 = store.ledger_size();

    auto ledger = store.ledger_snapshot();
    CHECK(count_qkd_entries(ledger, m0, m1) == 0);
    CHECK(count_qkd_entries(ledger, m1, m2) == 1);  // server-side GET_KEY
    CHECK(count_qkd_entries(ledger, m2, m3) == 1);  // client-side GET_KEY_WITH_IDS
    CHECK(ledger.back().op == "GET_KEY_WITH_IDS");

    REQUIRE(client_secret.bytes == server_secret.bytes);
    CHECK(to_bytes(client_secret.qkd_part()) == oracles::kme_pool_key(0, 0, 32));
}

TEST_CASE("secret equality over 200 randomized runs per combination") {
    struct Combo {
        Api api;
        Flow flow;
    };
    for (Combo combo : {Combo{Api::etsi014, Flow::client_initiated},
                        Combo{Api::etsi004, Flow::client_initiated},
                        Combo{Api::etsi014, Flow::server_initiated}}) {
        Rig rig(256, 13);
        auto suite = hybrid::HybridSuite::make("mock256", combo.api, combo.flow, 0x303C);
        std::mt19937_64 rng(17);
        for (int run = 0; run < 200; ++run) {
            hybrid::Context initiator(suite, rig.binding_a);
            hybrid::Context responder(suite, rig.binding_b);
            auto payload = initiator.keygen(rand_bytes(rng, 32));
            auto [ct, secret_r] = responder.encaps(payload.encode(), rand_bytes(rng, 32));
            auto secret_i = initiator.decaps(ct.encode());
            REQUIRE(secret_i.bytes == secret_r.bytes);
            REQUIRE(secret_i.bytes.size() == 32 + 32);
            initiator.close();
            responder.close();
        }
    }
}

TEST_CASE("flipping pq_ct bits changes only the PQ half of the secret") {
    Rig rig(4);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
    hybrid::Context alice(suite, rig.binding_a);
    hybrid::Context bob(suite, rig.binding_b);
    auto payload = alice.keygen(repeated(9, 32));
    auto [ct, secret_b] = bob.encaps(payload.encode(), repeated(10, 32));
    Bytes ct_wire = ct.encode();
    auto reference = alice.decaps(ct_wire);

    for (size_t bit = 0; bit < ct_wire.size() * 8; ++bit) {
        Bytes mutated = ct_wire;
        mutated[bit / 8] ^= uint8_t(1 << (bit % 8));
        auto secret = alice.decaps(mutated);
        CHECK(to_bytes(secret.pq_part()) != to_bytes(reference.pq_part()));
        CHECK(to_bytes(secret.qkd_part()) == to_bytes(reference.qkd_part()));
    }
}

TEST_CASE("malformed payloads and ciphertexts are rejected") {
    Rig rig(8);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
    hybrid::Context alice(suite, rig.binding_a);
    hybrid::Context bob(suite, rig.binding_b);
    auto payload = alice.keygen(repeated(0, 32));
    Bytes wire = payload.encode();
    wire.pop_back();
    CHECK(code_of([&] { bob.encaps(wire, repeated(0, 32)); }) == Errc::malformed_payload);

    auto [ct, secret] = bob.encaps(payload.encode(), repeated(0, 32));
    Bytes short_ct = ct.encode();
    short_ct.pop_back();
    CHECK(code_of([&] { alice.decaps(short_ct); }) == Errc::malformed_ciphertext);

    // server-initiated: an unknown trailing key id is detected at the KME
    auto si = hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::server_initiated,
                                        0x303E);
    hybrid::Context client(si, rig.binding_a);
    hybrid::Context server(si, rig.binding_b);
    auto si_payload = client.keygen(repeated(1, 32));
    auto [si_ct, si_secret] = server.encaps(si_payload.encode(), repeated(2, 32));
    Bytes tampered = si_ct.encode();
    tampered[tampered.size() - 1] ^= 0xFF;  // corrupt the key id
    CHECK(code_of([&] { client.decaps(tampered); }) == Errc::unknown_key_id);
}

TEST_CASE("context misuse is reported") {
    Rig rig(2);
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
    hybrid::Context alice(suite, rig.binding_a);
    CHECK(code_of([&] { alice.decaps(Bytes(32)); }) == Errc::invalid_context);

    hybrid::QkdBinding no_transport;
    CHECK(code_of([&] { hybrid::Context ctx(suite, no_transport); }) ==
          Errc::invalid_config);
}

TEST_CASE("errors from the KME propagate through keygen/encaps") {
    Rig rig(0);  // empty pool
    auto suite =
        hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 0x303C);
    hybrid::Context alice(suite, rig.binding_a);
    CHECK(code_of([&] { alice.keygen(repeated(0, 32)); }) == Errc::key_pool_exhausted);
}

TEST_CASE("a freshly registered KEM adapter runs the hybrid flows unchanged") {
    ensure_wide_kem();
    Rig rig(4);
    for (auto combo : {std::pair{Api::etsi014, Flow::client_initiated},
                       std::pair{Api::etsi004, Flow::client_initiated},
                       std::pair{Api::etsi014, Flow::server_initiated}}) {
        auto suite = hybrid::HybridSuite::make("mockwide", combo.first, combo.second, 0x3040);
        hybrid::Context initiator(suite, rig.binding_a);
        hybrid::Context responder(suite, rig.binding_b);
        auto payload = initiator.keygen(repeated(6, 32));
        size_t expected_payload =
            combo.second == Flow::client_initiated ? 64 + 16 : 64;
        CHECK(payload.encode().size() == expected_payload);
        auto [ct, secret_r] = responder.encaps(payload.encode(), repeated(7, 32));
        auto secret_i = initiator.decaps(ct.encode());
        REQUIRE(secret_i.bytes == secret_r.bytes);
        CHECK(secret_i.bytes.size() == 64 + 32);
        CHECK(secret_i.pq_len == 64);
        initiator.close();
        responder.close();
    }
}

TEST_CASE("expected call counts table") {
    auto c14 = hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::client_initiated, 1);
    auto c04 = hybrid::HybridSuite::make("mock256", Api::etsi004, Flow::client_initiated, 2);
    auto s14 = hybrid::HybridSuite::make("mock256", Api::etsi014, Flow::server_initiated, 3);
    CHECK(hybrid::expected_call_counts(c14) == hybrid::QkdCallCounts{1, 1, 0});
    CHECK(hybrid::expected_call_counts(c04) == hybrid::QkdCallCounts{1, 2, 1});
    CHECK(hybrid::expected_call_counts(s14) == hybrid::QkdCallCounts{0, 1, 1});
}
