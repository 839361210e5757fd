#include "noisepuf/bits.hpp"

#include <stdexcept>

#include "noisepuf/seed.hpp"

namespace noisepuf {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

BitString BitString::random(std::size_t n, std::uint64_t seed) {
    BitString out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = counter_hash(seed, i / 64);
        out.bits_[i] = static_cast<std::uint8_t>((word >> (63 - i % 64)) & 1U);
    }
    return out;
}

BitString BitString::from_binary(std::string_view text) {
    BitString out;
    out.bits_.reserve(text.size());
    for (char c : text) {
        if (c != '0' && c != '1') throw std::invalid_argument("binary string: bad character");
        out.push_back(c == '1');
    }
    return out;
}

BitString BitString::from_hex(std::string_view hex, std::size_t n) {
    if (hex.size() != (n + 3) / 4) throw std::invalid_argument("hex string: length does not match bit count");
    BitString out(n);
    for (std::size_t i = 0; i < hex.size(); ++i) {
        const int v = hex_value(hex[i]);
        if (v < 0) throw std::invalid_argument("hex string: bad character");
        for (int b = 0; b < 4; ++b) {
            const std::size_t pos = i * 4 + static_cast<std::size_t>(b);
            const bool bit = ((v >> (3 - b)) & 1) != 0;
            if (pos < n) {
                out.set(pos, bit);
            } else if (bit) {
                throw std::invalid_argument("hex string: nonzero padding");
            }
        }
    }
    return out;
}

BitString BitString::from_packed(std::span<const std::uint8_t> bytes, std::size_t n) {
    if (bytes.size() < (n + 7) / 8) throw std::invalid_argument("packed bits: too few bytes");
    BitString out(n);
    for (std::size_t i = 0; i < n; ++i) out.set(i, ((bytes[i / 8] >> (7 - i % 8)) & 1U) != 0);
    return out;
}

bool BitString::at(std::size_t i) const {
    if (i >= bits_.size()) throw std::out_of_range("BitString::at");
    return bits_[i] != 0;
}

std::size_t BitString::popcount() const noexcept {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

std::size_t BitString::hamming_distance(const BitString& other) const {
    if (other.size() != size()) throw std::invalid_argument("hamming_distance: length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) d += (bits_[i] != other.bits_[i]) ? 1 : 0;
    return d;
}

BitString BitString::slice(std::size_t offset, std::size_t count) const {
    if (offset + count > size()) throw std::out_of_range("BitString::slice");
    BitString out(count);
    for (std::size_t i = 0; i < count; ++i) out.bits_[i] = bits_[offset + i];
    return out;
}

BitString& BitString::operator^=(const BitString& other) {
    if (other.size() != size()) throw std::invalid_argument("xor: length mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] ^= other.bits_[i];
    return *this;
}

std::string BitString::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out((size() + 3) / 4, '0');
    for (std::size_t i = 0; i < size(); ++i) {
        if (bits_[i] == 0) continue;
        auto& c = out[i / 4];
        c = kDigits[hex_value(c) | (1 << (3 - i % 4))];
    }
    return out;
}

std::string BitString::to_binary() const {
    std::string out;
    out.reserve(size());
    for (auto b : bits_) out.push_back(b ? '1' : '0');
    return out;
}

std::vector<std::uint8_t> BitString::packed() const {
    std::vector<std::uint8_t> out((size() + 7) / 8, 0);
    for (std::size_t i = 0; i < size(); ++i) {
        if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    }
    return out;
}

}  // namespace noisepuf
