#include "noisepuf/nbl.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "noisepuf/errors.hpp"
#include "noisepuf/seed.hpp"

namespace noisepuf::nbl {

GeneratorBank::GeneratorBank(std::vector<std::array<std::uint64_t, 2>> seeds) : seeds_(std::move(seeds)) {
    std::set<std::uint64_t> seen;
    for (const auto& pair : seeds_) {
        for (auto s : pair) {
            if (!seen.insert(s).second) throw std::invalid_argument("GeneratorBank: generator seeds must be distinct");
        }
    }
}

GeneratorBank GeneratorBank::from_seed(std::size_t n_bits, std::uint64_t bank_seed) {
    if (n_bits < 1) throw std::invalid_argument("GeneratorBank: n_bits must be >= 1");
    std::vector<std::array<std::uint64_t, 2>> seeds(n_bits);
    std::set<std::uint64_t> seen;
    std::uint64_t draw = 0;
    for (auto& pair : seeds) {
        for (auto& s : pair) {
            do {
                s = derive_seed(bank_seed, draw++, "nbl/generator");
            } while (!seen.insert(s).second);
        }
    }
    return GeneratorBank(std::move(seeds));
}

Assignment Assignment::from_secret(const GeneratorBank& bank, const BitString& secret) {
    if (secret.size() != bank.n_bits()) throw std::invalid_argument("assign_from_secret: secret length != bank size");
    Assignment a;
    a.high_is_b_ = secret;
    return a;
}

namespace {

void check_lengths(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits) {
    if (bits.size() != bank.n_bits() || assignment.size() != bank.n_bits()) {
        throw std::invalid_argument("nbl: bit string length does not match the generator bank");
    }
}

// Sign bit of the selected generators, XOR-accumulated: the 0/1 form of the
// product, which is what both modes need.
int parity_at(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits, std::uint64_t cycle) {
    std::uint64_t parity = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        parity ^= counter_hash(bank.seed(i, assignment.label_for(i, bits[i])), cycle) >> 63;
    }
    return static_cast<int>(parity);
}

}  // namespace

int hyperspace_product(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits,
                       std::uint64_t cycle, StreamMode mode) {
    check_lengths(bank, assignment, bits);
    const int parity = parity_at(bank, assignment, bits, cycle);
    return mode == StreamMode::product ? from_xor_value(parity) : parity;
}

RtwStream encode_string(const GeneratorBank& bank, const Assignment& assignment, const BitString& bits,
                        std::size_t m, std::uint64_t start, StreamMode mode) {
    if (m < 1) throw std::invalid_argument("encode_string: m must be >= 1");
    check_lengths(bank, assignment, bits);
    RtwStream stream{mode, start, {}};
    stream.values.reserve(m);
    for (std::size_t s = 0; s < m; ++s) {
        const int parity = parity_at(bank, assignment, bits, start + s);
        stream.values.push_back(static_cast<std::int8_t>(mode == StreamMode::product ? from_xor_value(parity) : parity));
    }
    return stream;
}

VerifyReport verify_stream(const GeneratorBank& bank, const Assignment& assignment, const BitString& local_bits,
                           const RtwStream& incoming, StreamMode expected_mode) {
    if (incoming.values.empty()) throw std::invalid_argument("verify_stream: empty stream");
    if (incoming.mode != expected_mode) throw ProtocolError("verify_stream: stream mode does not match verifier");
    check_lengths(bank, assignment, local_bits);
    for (const int v : incoming.values) {
        const bool valid = incoming.mode == StreamMode::product ? (v == 1 || v == -1) : (v == 0 || v == 1);
        if (!valid) throw ProtocolError("verify_stream: amplitude outside the stream alphabet");
    }

    VerifyReport report;
    for (std::size_t s = 0; s < incoming.values.size(); ++s) {
        const int local = parity_at(bank, assignment, local_bits, incoming.start + s);
        const int remote = incoming.values[s];
        ++report.steps_checked;
        const bool mismatch = incoming.mode == StreamMode::product ? from_xor_value(local) * remote == -1
                                                                   : (local ^ remote) != 0;
        if (mismatch) {
            report.first_mismatch = s;
            return report;
        }
    }
    report.accepted = true;
    report.residual_false_accept = false_accept_probability(incoming.values.size());
    return report;
}

double false_accept_probability(std::size_t m) noexcept { return std::ldexp(1.0, -static_cast<int>(m)); }

std::vector<std::uint8_t> encode_wire(const RtwStream& stream) {
    const std::size_t m = stream.values.size();
    if (m > 0xFFFFFFFFULL) throw std::invalid_argument("encode_wire: stream too long");
    std::vector<std::uint8_t> out;
    out.reserve(13 + (m + 7) / 8);
    out.push_back(static_cast<std::uint8_t>(stream.mode));
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(m >> shift));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(stream.start >> shift));
    std::vector<std::uint8_t> payload((m + 7) / 8, 0);
    for (std::size_t s = 0; s < m; ++s) {
        const int v = stream.values[s];
        const bool bit = stream.mode == StreamMode::product ? v < 0 : v != 0;
        if (bit) payload[s / 8] |= static_cast<std::uint8_t>(0x80U >> (s % 8));
    }
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

RtwStream decode_wire(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 13) throw std::invalid_argument("decode_wire: truncated header");
    if (bytes[0] > 1) throw std::invalid_argument("decode_wire: unknown mode");
    RtwStream stream;
    stream.mode = static_cast<StreamMode>(bytes[0]);
    std::uint64_t m = 0;
    for (std::size_t k = 1; k < 5; ++k) m = (m << 8) | bytes[k];
    for (std::size_t k = 5; k < 13; ++k) stream.start = (stream.start << 8) | bytes[k];
    if (m == 0) throw std::invalid_argument("decode_wire: empty stream");
    if (bytes.size() != 13 + (m + 7) / 8) throw std::invalid_argument("decode_wire: payload length mismatch");
    if (m % 8 != 0 && (bytes.back() & (0xFFU >> (m % 8))) != 0) {
        throw std::invalid_argument("decode_wire: nonzero padding");
    }
    stream.values.resize(m);
    for (std::size_t s = 0; s < m; ++s) {
        const bool bit = ((bytes[13 + s / 8] >> (7 - s % 8)) & 1U) != 0;
        stream.values[s] = static_cast<std::int8_t>(stream.mode == StreamMode::product ? (bit ? -1 : 1) : (bit ? 1 : 0));
    }
    return stream;
}

}  // namespace noisepuf::nbl
