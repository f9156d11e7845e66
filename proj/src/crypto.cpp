#include "qkdkem/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "qkdkem/errors.hpp"

namespace qkdkem::crypto {

std::array<uint8_t, 32> sha256(ByteView data) {
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        raise(Errc::io_error, "SHA-256 failed");
    }
    return out;
}

std::array<uint8_t, 32> hmac_sha256(ByteView key, ByteView message) {
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.data(), int(key.size()), message.data(), message.size(),
             out.data(), &len) == nullptr ||
        len != out.size()) {
        raise(Errc::io_error, "HMAC-SHA-256 failed");
    }
    return out;
}

Bytes prf_expand(ByteView key, ByteView prefix, size_t out_len) {
    Bytes out;
    out.reserve(out_len);
    uint32_t block = 0;
    while (out.size() < out_len) {
        Bytes msg(prefix.begin(), prefix.end());
        Bytes counter = be32(block);
        msg.insert(msg.end(), counter.begin(), counter.end());
        auto digest = hmac_sha256(key, msg);
        size_t take = std::min(digest.size(), out_len - out.size());
        out.insert(out.end(), digest.begin(), digest.begin() + take);
        ++block;
    }
    return out;
}

Bytes be32(uint32_t value) {
    return Bytes{uint8_t(value >> 24), uint8_t(value >> 16), uint8_t(value >> 8),
                 uint8_t(value)};
}

Bytes be64(uint64_t value) {
    Bytes out(8);
    for (int i = 0; i < 8; ++i) out[i] = uint8_t(value >> (56 - 8 * i));
    return out;
}

}  // namespace qkdkem::crypto
