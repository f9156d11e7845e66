#include "oracles.hpp"

namespace oracles {

namespace {

Bytes be32(uint32_t v) {
    return Bytes{uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
}

Bytes label_msg(const char* label, uint32_t index) {
    Bytes msg(label, label + std::char_traits<char>::length(label));
    Bytes idx = be32(index);
    msg.insert(msg.end(), idx.begin(), idx.end());
    return msg;
}

Bytes expand(const Bytes& key, Bytes prefix, size_t out_len) {
    Bytes out;
    uint32_t block = 0;
    while (out.size() < out_len) {
        Bytes msg = prefix;
        Bytes counter = be32(block);
        msg.insert(msg.end(), counter.begin(), counter.end());
        auto digest = refcrypto::hmac_sha256(key, msg);
        size_t take = std::min(digest.size(), out_len - out.size());
        out.insert(out.end(), digest.begin(), digest.begin() + take);
        ++block;
    }
    return out;
}

std::array<uint8_t, 16> uuid_bytes(const std::array<uint8_t, 32>& digest) {
    std::array<uint8_t, 16> id{};
    std::copy(digest.begin(), digest.begin() + 16, id.begin());
    id[6] = uint8_t((id[6] & 0x0F) | 0x40);
    id[8] = uint8_t((id[8] & 0x3F) | 0x80);
    return id;
}

}  // namespace

Bytes mock256_pk(const Bytes& sk) {
    auto digest = refcrypto::sha256(sk);
    return Bytes(digest.begin(), digest.end());
}

Bytes mock256_ss(const Bytes& pk, const Bytes& ct) {
    Bytes input = pk;
    input.insert(input.end(), ct.begin(), ct.end());
    auto digest = refcrypto::sha256(input);
    return Bytes(digest.begin(), digest.end());
}

Bytes kme_seed_key(uint64_t seed) {
    Bytes out(8);
    for (int i = 0; i < 8; ++i) out[i] = uint8_t(seed >> (56 - 8 * i));
    return out;
}

std::array<uint8_t, 16> kme_pool_id(uint64_t seed, uint32_t index) {
    return uuid_bytes(refcrypto::hmac_sha256(kme_seed_key(seed), label_msg("pool-id", index)));
}

Bytes kme_pool_key(uint64_t seed, uint32_t index, size_t key_len) {
    return expand(kme_seed_key(seed), label_msg("pool-key", index), key_len);
}

std::array<uint8_t, 16> kme_stream_id(uint64_t seed, uint32_t counter) {
    return uuid_bytes(
        refcrypto::hmac_sha256(kme_seed_key(seed), label_msg("stream-id", counter)));
}

Bytes kme_stream_key(uint64_t seed, uint32_t counter, uint32_t index, size_t key_len) {
    auto stream_seed =
        refcrypto::hmac_sha256(kme_seed_key(seed), label_msg("stream-seed", counter));
    Bytes seed_bytes(stream_seed.begin(), stream_seed.end());
    return expand(seed_bytes, label_msg("stream-key", index), key_len);
}

}  // namespace oracles
