#pragma once

#include <cstdint>
#include <string_view>

#include "noisepuf/bits.hpp"

namespace noisepuf::puf {

/// Tweakable permutation of N-bit strings: an unbalanced Feistel network
/// whose round function is counter_hash over the packed half, the tweak,
/// the round and a domain label. Bijective for every (tweak, domain).
BitString keyed_permutation(const BitString& input, std::uint64_t tweak, std::string_view domain);

/// Keystream for the challenge cipher of the strong and simple variants:
///
///   cipher_stream(K, c) = K XOR keyed_permutation(K, c)
///
/// so that K XOR keystream is a permutation of K for each counter. A
/// guessed key therefore selects the same generators as the real one only
/// when it equals the real key. This is a simulation stand-in, not an
/// information-theoretically secure cipher.
BitString cipher_stream(const BitString& secret, std::uint64_t counter);

/// XOR with the keystream; applying it twice returns the input.
BitString apply_cipher(const BitString& text, const BitString& secret, std::uint64_t counter);

/// Ultra-strong response: the stored key masked by a pad derived from the
/// key and the lock's nonce (response = keyed_permutation(K, nonce)).
BitString one_time_response(const BitString& secret, std::uint64_t nonce);

}  // namespace noisepuf::puf
