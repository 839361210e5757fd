#pragma once

#include <cmath>
#include <cstdint>

namespace noisepuf {

/// Standard deviation of a binomial rate estimate with success probability p.
inline double binomial_sigma(double p, std::uint64_t trials) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

/// Ceiling of log2(x) for x >= 1, computed on integers.
constexpr unsigned ceil_log2(std::uint64_t x) noexcept {
    unsigned bits = 0;
    std::uint64_t v = 1;
    while (v < x && bits < 64) {
        v <<= 1;
        ++bits;
    }
    return bits;
}

}  // namespace noisepuf
