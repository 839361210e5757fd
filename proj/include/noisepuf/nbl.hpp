#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "noisepuf/bits.hpp"
#include "noisepuf/noise.hpp"

namespace noisepuf::nbl {

/// product: +1/-1 amplitudes, checked by multiplication.
/// xor: 0/1 amplitudes (+1 -> 0, -1 -> 1), checked by XOR.
enum class StreamMode : std::uint8_t { product = 0, xor_bits = 1 };

enum class GeneratorLabel : std::uint8_t { a = 0, b = 1 };

/// 2N public RTW generators, two (A and B) per bit position.
class GeneratorBank {
public:
    GeneratorBank() = default;
    /// Throws unless every seed is distinct.
    explicit GeneratorBank(std::vector<std::array<std::uint64_t, 2>> seeds);
    static GeneratorBank from_seed(std::size_t n_bits, std::uint64_t bank_seed);

    std::size_t n_bits() const noexcept { return seeds_.size(); }
    std::uint64_t seed(std::size_t position, GeneratorLabel label) const {
        return seeds_.at(position)[static_cast<std::size_t>(label)];
    }
    noise::RtwGenerator generator(std::size_t position, GeneratorLabel label) const {
        return noise::RtwGenerator(seed(position, label));
    }
    const std::vector<std::array<std::uint64_t, 2>>& seeds() const noexcept { return seeds_; }

    friend bool operator==(const GeneratorBank&, const GeneratorBank&) = default;

private:
    std::vector<std::array<std::uint64_t, 2>> seeds_;
};

/// Secret assignment of generators to bit values: at position i, secret bit
/// 0 means A represents H, 1 means B represents H.
class Assignment {
public:
    static Assignment from_secret(const GeneratorBank& bank, const BitString& secret);

    std::size_t size() const noexcept { return high_is_b_.size(); }
    GeneratorLabel high_label(std::size_t position) const {
        return high_is_b_.at(position) ? GeneratorLabel::b : GeneratorLabel::a;
    }
    /// Generator representing `bit` at `position`.
    GeneratorLabel label_for(std::size_t position, bool bit) const {
        const bool b = bit ? high_is_b_.at(position) : !high_is_b_.at(position);
        return b ? GeneratorLabel::b : GeneratorLabel::a;
    }
    friend bool operator==(const Assignment&, const Assignment&) = default;

private:
    BitString high_is_b_;
};

/// Hyperspace vector value at cycle j: product over positions of the
/// selected generator (product mode) or XOR of the 0/1-mapped values.
int hyperspace_product(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits,
                       std::uint64_t cycle, StreamMode mode);

constexpr int to_xor_value(int amplitude) noexcept { return amplitude < 0 ? 1 : 0; }
constexpr int from_xor_value(int value) noexcept { return value != 0 ? -1 : 1; }

struct RtwStream {
    StreamMode mode = StreamMode::product;
    std::uint64_t start = 0;
    std::vector<std::int8_t> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const RtwStream&, const RtwStream&) = default;
};

/// Values of hyperspace_product at cycles start .. start + m - 1.
RtwStream encode_string(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits,
                        std::size_t m, std::uint64_t start, StreamMode mode);

struct VerifyReport {
    bool accepted = false;
    std::size_t steps_checked = 0;
    std::optional<std::size_t> first_mismatch;
    /// 2^-m when accepted, 0 otherwise.
    double residual_false_accept = 0.0;
};

/// Recomputes the local vector at every incoming cycle and rejects on the
/// first disagreement (W_A * W_B = -1, or XOR = 1). Throws ProtocolError on
/// a mode mismatch and std::invalid_argument on an empty stream.
VerifyReport verify_stream(const GeneratorBank& bank, const Assignment& assignment, const BitString& local_bits,
                           const RtwStream& incoming, StreamMode expected_mode = StreamMode::product);

/// Probability that two independent RTW streams agree on m steps: 2^-m.
double false_accept_probability(std::size_t m) noexcept;

/// Wire format, big-endian:
///   mode (1 byte) | m (4 bytes) | start (8 bytes) | ceil(m/8) payload bytes
/// Payload is one bit per step, most significant first, zero padded. In
/// product mode the bit is the sign (1 for -1); in xor mode it is the value.
std::vector<std::uint8_t> encode_wire(const RtwStream& stream);
/// Throws std::invalid_argument on a malformed buffer.
RtwStream decode_wire(std::span<const std::uint8_t> bytes);

}  // namespace noisepuf::nbl
