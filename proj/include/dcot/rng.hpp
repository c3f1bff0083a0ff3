#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace dcot {

/// SplitMix64 (Steele, Lea & Flood). Every seeded draw in the toolkit goes
/// through this generator so that splits, trigger choices and k assignments
/// can be reproduced bit-for-bit from any language:
///
///     state += 0x9E3779B97F4A7C15
///     z = state
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     return z ^ (z >> 31)
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform-ish draw in [0, bound) as `next() % bound`.
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    /// Uniform double in [0, 1) from the top 53 bits.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// 64-bit FNV-1a over the bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a keyed sub-stream: `seed ^ fnv1a64(key)`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
    return seed ^ fnv1a64(key);
}

/// Fisher-Yates from the back: for i = n-1 .. 1, swap(i, below(i+1)).
template <typename T>
void seeded_shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace dcot
