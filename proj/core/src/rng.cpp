#include "miscon/rng.hpp"

#include <array>

#include "miscon/errors.hpp"

namespace miscon {

std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::array<char, 16> buf;
    for (int i = 15; i >= 0; --i) {
        buf[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return std::string(buf.data(), buf.size());
}

std::uint64_t parse_hex64(std::string_view s) {
    if (s.empty() || s.size() > 16) {
        throw InputError("hex value '" + std::string(s) + "' must be 1..16 hex digits");
    }
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') {
            v |= static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            v |= static_cast<std::uint64_t>(c - 'A' + 10);
        } else {
            throw InputError("hex value '" + std::string(s) + "' contains non-hex character");
        }
    }
    return v;
}

}  // namespace miscon
