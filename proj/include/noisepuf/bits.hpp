#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace noisepuf {

/// Ordered bit string. Bit 0 is the first (most significant) bit in every
/// packed or hex rendering.
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n) : bits_(n, 0) {}

    static BitString random(std::size_t n, std::uint64_t seed);
    /// Parses '0'/'1' characters.
    static BitString from_binary(std::string_view text);
    /// Parses hex produced by to_hex(); `n` is the bit length.
    static BitString from_hex(std::string_view hex, std::size_t n);
    /// Unpacks MSB-first bytes; trailing pad bits are ignored.
    static BitString from_packed(std::span<const std::uint8_t> bytes, std::size_t n);

    std::size_t size() const noexcept { return bits_.size(); }
    bool empty() const noexcept { return bits_.empty(); }

    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    bool at(std::size_t i) const;
    void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
    void flip(std::size_t i) { bits_[i] ^= 1; }
    void push_back(bool value) { bits_.push_back(value ? 1 : 0); }

    std::size_t popcount() const noexcept;
    std::size_t hamming_distance(const BitString& other) const;
    BitString slice(std::size_t offset, std::size_t count) const;

    BitString& operator^=(const BitString& other);
    friend BitString operator^(BitString lhs, const BitString& rhs) { return lhs ^= rhs; }
    friend bool operator==(const BitString&, const BitString&) = default;

    std::string to_hex() const;
    std::string to_binary() const;
    std::vector<std::uint8_t> packed() const;

private:
    std::vector<std::uint8_t> bits_;
};

}  // namespace noisepuf
