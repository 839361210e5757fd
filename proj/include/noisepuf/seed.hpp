#pragma once

#include <cstdint>
#include <string_view>

namespace noisepuf {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford mix13). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Value of the SplitMix64 sequence started at `seed`, at position `index`.
/// Counter-based: any index is addressable without replaying earlier ones.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(seed + (index + 1) * kGoldenGamma);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed derivation rule used by every Monte Carlo driver:
///
///   derive_seed(master, index, label)
///     = mix64(counter_hash(master XOR fnv1a64(label), index))
///
/// where counter_hash(s, i) = mix64(s + (i + 1) * 0x9E3779B97F4A7C15).
/// Trials never share generator state; each pulls its own seed from here.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::string_view label) noexcept {
    return mix64(counter_hash(master ^ fnv1a64(label), index));
}

}  // namespace noisepuf
