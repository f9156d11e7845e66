#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "qkdkem/bytes.hpp"

namespace qkdkem {

// 16-byte key identifier, rendered in RFC 4122 textual form on the wire.
struct Uuid {
    std::array<uint8_t, 16> bytes{};

    static Uuid from_bytes(ByteView raw);        // throws invalid_request on wrong length
    static Uuid parse(std::string_view text);    // throws invalid_request on bad format
    std::string to_string() const;

    bool is_nil() const;

    auto operator<=>(const Uuid&) const = default;
};

struct UuidHash {
    size_t operator()(const Uuid& u) const noexcept;
};

using QkdKeyId = Uuid;

}  // namespace qkdkem
