#include "qkdkem/uuid.hpp"

#include <cstring>

#include "qkdkem/errors.hpp"

namespace qkdkem {

Uuid Uuid::from_bytes(ByteView raw) {
    if (raw.size() != 16) raise(Errc::invalid_request, "UUID must be 16 bytes");
    Uuid u;
    std::memcpy(u.bytes.data(), raw.data(), 16);
    return u;
}

Uuid Uuid::parse(std::string_view text) {
    // 8-4-4-4-12 hex groups
    if (text.size() != 36 || text[8] != '-' || text[13] != '-' || text[18] != '-' ||
        text[23] != '-') {
        raise(Errc::invalid_request, "bad UUID format");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Uuid u;
    size_t out = 0;
    for (size_t i = 0; i < text.size();) {
        if (text[i] == '-') {
            ++i;
            continue;
        }
        int hi = nibble(text[i]);
        int lo = nibble(text[i + 1]);
        if (hi < 0 || lo < 0) raise(Errc::invalid_request, "bad UUID digit");
        u.bytes[out++] = uint8_t(hi << 4 | lo);
        i += 2;
    }
    return u;
}

std::string Uuid::to_string() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    for (size_t i = 0; i < bytes.size(); ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        out.push_back(digits[bytes[i] >> 4]);
        out.push_back(digits[bytes[i] & 0x0F]);
    }
    return out;
}

bool Uuid::is_nil() const {
    for (uint8_t b : bytes) {
        if (b != 0) return false;
    }
    return true;
}

size_t UuidHash::operator()(const Uuid& u) const noexcept {
    // FNV-1a over the 16 bytes
    size_t h = 14695981039346656037ull;
    for (uint8_t b : u.bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace qkdkem
