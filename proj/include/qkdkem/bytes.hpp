#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qkdkem {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

Bytes concat(ByteView a, ByteView b);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view text);  // throws Errc::invalid_request on bad input

std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);  // throws Errc::invalid_request

inline Bytes to_bytes(ByteView v) { return Bytes(v.begin(), v.end()); }

inline Bytes repeated(uint8_t value, size_t n) { return Bytes(n, value); }

}  // namespace qkdkem
