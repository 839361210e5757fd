#include "noisepuf/cipher.hpp"

#include <stdexcept>

#include "noisepuf/seed.hpp"

namespace noisepuf::puf {

namespace {

constexpr int kRounds = 6;

std::uint64_t absorb(const BitString& bits, std::size_t offset, std::size_t count, std::uint64_t state) {
    std::uint64_t word = 0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < count; ++i) {
        word = (word << 1) | (bits[offset + i] ? 1U : 0U);
        if (++filled == 64) {
            state = mix64(state ^ word);
            word = 0;
            filled = 0;
        }
    }
    return mix64(state ^ word ^ (static_cast<std::uint64_t>(count) << 32) ^ filled);
}

// XORs round_function(source half) into the target half.
void feistel_round(BitString& bits, std::size_t src_off, std::size_t src_len, std::size_t dst_off,
                   std::size_t dst_len, std::uint64_t key) {
    const std::uint64_t state = absorb(bits, src_off, src_len, key);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < dst_len; ++i) {
        if (i % 64 == 0) word = counter_hash(state, i / 64);
        if ((word >> (63 - i % 64)) & 1U) bits.flip(dst_off + i);
    }
}

}  // namespace

BitString keyed_permutation(const BitString& input, std::uint64_t tweak, std::string_view domain) {
    BitString out = input;
    const std::size_t n = input.size();
    if (n == 0) return out;
    const std::uint64_t base = derive_seed(tweak, n, domain);
    if (n == 1) {
        if (base & 1U) out.flip(0);
        return out;
    }
    const std::size_t left = n / 2;
    const std::size_t right = n - left;
    for (int r = 0; r < kRounds; ++r) {
        const std::uint64_t key = counter_hash(base, static_cast<std::uint64_t>(r));
        if (r % 2 == 0) {
            feistel_round(out, left, right, 0, left, key);
        } else {
            feistel_round(out, 0, left, left, right, key);
        }
    }
    return out;
}

BitString cipher_stream(const BitString& secret, std::uint64_t counter) {
    return secret ^ keyed_permutation(secret, counter, "puf/cipher");
}

BitString apply_cipher(const BitString& text, const BitString& secret, std::uint64_t counter) {
    if (text.size() != secret.size()) throw std::invalid_argument("apply_cipher: length mismatch");
    return text ^ cipher_stream(secret, counter);
}

BitString one_time_response(const BitString& secret, std::uint64_t nonce) {
    return keyed_permutation(secret, nonce, "puf/one-time-pad");
}

}  // namespace noisepuf::puf
