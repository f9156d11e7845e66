#pragma once

#include <array>

#include "qkdkem/bytes.hpp"

namespace qkdkem::crypto {

std::array<uint8_t, 32> sha256(ByteView data);

std::array<uint8_t, 32> hmac_sha256(ByteView key, ByteView message);

// Deterministic byte expansion: concatenates HMAC-SHA-256(key, prefix || be32(block))
// for block = 0,1,... and truncates to out_len. The KME key pools and streams are
// derived through this so an external party holding the seed can regenerate them.
Bytes prf_expand(ByteView key, ByteView prefix, size_t out_len);

Bytes be32(uint32_t value);
Bytes be64(uint64_t value);

}  // namespace qkdkem::crypto
