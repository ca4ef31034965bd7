#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string>
#include <string_view>

namespace miscon {

// All randomness in the engine flows through SplitMix64 and the helpers below.
// std::uniform_*_distribution is implementation-defined, which would break the
// byte-identical-output contract across standard libraries.

/// Incremental FNV-1a (64-bit). Strings are length-prefixed so that
/// concatenated fields cannot alias each other.
class Fnv1a64 {
public:
    Fnv1a64& feed(std::string_view bytes) {
        feed_raw(static_cast<std::uint64_t>(bytes.size()));
        for (unsigned char c : bytes) step(c);
        return *this;
    }

    Fnv1a64& feed(std::uint64_t v) {
        feed_raw(v);
        return *this;
    }

    std::uint64_t value() const noexcept { return hash_; }

private:
    void feed_raw(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) step(static_cast<unsigned char>(v >> (8 * i)));
    }
    void step(unsigned char c) {
        hash_ ^= c;
        hash_ *= 0x100000001b3ULL;
    }

    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Plain FNV-1a over raw bytes, no length prefix. Used for content hashes
/// (template pinning, fixture keys) where the input is a single blob.
inline std::uint64_t fnv1a64_bytes(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);  // throws InputError on bad input

/// Derives a child seed from (seed, tag, index). Deterministic and
/// order-independent with respect to worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return Fnv1a64{}.feed(seed).feed(tag).feed(index).value();
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Unbiased integer in [0, bound) via rejection sampling. bound > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes two draws per call.
    double next_gaussian() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace miscon
