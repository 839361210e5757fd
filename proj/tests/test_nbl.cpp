#include "doctest.h"

#include <cmath>

#include "noisepuf/errors.hpp"
#include "noisepuf/nbl.hpp"
#include "noisepuf/seed.hpp"
#include "noisepuf/stats.hpp"

using namespace noisepuf;
using namespace noisepuf::nbl;

namespace {

// Direct product of the selected generator amplitudes, bypassing the library.
int oracle_product(const GeneratorBank& bank, const BitString& secret, const BitString& bits, std::uint64_t cycle) {
    int w = 1;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        // secret bit 0: A represents H; the generator for bit value v is
        // A when (v == 1) == (secret == 0).
        const bool use_b = bits[i] ? secret[i] : !secret[i];
        const std::uint64_t seed = bank.seeds()[i][use_b ? 1 : 0];
        w *= (counter_hash(seed, cycle) >> 63) != 0 ? -1 : 1;
    }
    return w;
}

}  // namespace

TEST_CASE("generator bank") {
    const auto bank = GeneratorBank::from_seed(16, 5);
    CHECK(bank.n_bits() == 16);
    CHECK(bank == GeneratorBank::from_seed(16, 5));
    CHECK_FALSE(bank == GeneratorBank::from_seed(16, 6));
    CHECK_THROWS_AS(GeneratorBank({{1, 2}, {3, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(GeneratorBank({{4, 4}}), std::invalid_argument);
    CHECK(bank.generator(3, GeneratorLabel::b).seed() == bank.seed(3, GeneratorLabel::b));
}

TEST_CASE("assignment follows the secret") {
    const auto bank = GeneratorBank::from_seed(4, 1);
    const auto a = Assignment::from_secret(bank, BitString::from_binary("0101"));
    CHECK(a.high_label(0) == GeneratorLabel::a);
    CHECK(a.high_label(1) == GeneratorLabel::b);
    CHECK(a.label_for(0, true) == GeneratorLabel::a);
    CHECK(a.label_for(0, false) == GeneratorLabel::b);
    CHECK(a.label_for(1, false) == GeneratorLabel::a);
    CHECK(Assignment::from_secret(bank, BitString(4)).high_label(2) == GeneratorLabel::a);
    CHECK_THROWS_AS(Assignment::from_secret(bank, BitString(3)), std::invalid_argument);
}

TEST_CASE("hyperspace vector matches the direct product, in both modes") {
    const auto bank = GeneratorBank::from_seed(12, 9);
    for (std::uint64_t t = 0; t < 20; ++t) {
        const auto secret = BitString::random(12, 100 + t);
        const auto bits = BitString::random(12, 200 + t);
        const auto assign = Assignment::from_secret(bank, secret);
        for (std::uint64_t j = 0; j < 50; ++j) {
            const int w = oracle_product(bank, secret, bits, 1000 * t + j);
            CHECK(hyperspace_product(bank, assign, bits, 1000 * t + j, StreamMode::product) == w);
            CHECK(hyperspace_product(bank, assign, bits, 1000 * t + j, StreamMode::xor_bits) == to_xor_value(w));
        }
    }
    CHECK(to_xor_value(1) == 0);
    CHECK(to_xor_value(-1) == 1);
    CHECK(from_xor_value(0) == 1);
    CHECK(from_xor_value(1) == -1);
}

TEST_CASE("hyperspace vector is orthogonal to its factors") {
    const auto bank = GeneratorBank::from_seed(8, 3);
    const auto secret = BitString::random(8, 4);
    const auto bits = BitString::random(8, 5);
    const auto assign = Assignment::from_secret(bank, secret);
    const int n = 100000;
    for (std::size_t pos = 0; pos < 8; ++pos) {
        const auto factor = bank.generator(pos, assign.label_for(pos, bits[pos]));
        double corr = 0.0;
        for (int j = 0; j < n; ++j) {
            corr += hyperspace_product(bank, assign, bits, j, StreamMode::product) * factor.amplitude(j);
        }
        CHECK(std::abs(corr / n) < 5.0 / std::sqrt(double(n)));
    }
}

TEST_CASE("enumeration: differing strings agree on exactly half of all generator sign patterns") {
    // W_x * W_y is the product over differing positions of a_i * b_i. Over
    // every sign assignment of those 2|D| generators exactly half give +1.
    for (unsigned d = 1; d <= 5; ++d) {
        const unsigned vars = 2 * d;
        unsigned agree = 0;
        for (unsigned mask = 0; mask < (1u << vars); ++mask) {
            int w = 1;
            for (unsigned v = 0; v < vars; ++v) w *= ((mask >> v) & 1u) ? -1 : 1;
            if (w == 1) ++agree;
        }
        CHECK(agree * 2 == (1u << vars));
    }
}

TEST_CASE("per-step agreement of differing strings is 1/2 and independent across steps") {
    const auto bank = GeneratorBank::from_seed(10, 21);
    const auto assign = Assignment::from_secret(bank, BitString::random(10, 1));
    const auto x = BitString::random(10, 2);
    auto y = x;
    y.flip(3);
    y.flip(7);
    const int n = 200000;
    int single = 0;
    int pair = 0;
    for (int j = 0; j < n; ++j) {
        const bool a0 = hyperspace_product(bank, assign, x, 2 * j, StreamMode::product) ==
                        hyperspace_product(bank, assign, y, 2 * j, StreamMode::product);
        const bool a1 = hyperspace_product(bank, assign, x, 2 * j + 1, StreamMode::product) ==
                        hyperspace_product(bank, assign, y, 2 * j + 1, StreamMode::product);
        single += a0 ? 1 : 0;
        pair += (a0 && a1) ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(single) / n - 0.5) < 4.0 * binomial_sigma(0.5, n));
    CHECK(std::abs(static_cast<double>(pair) / n - 0.25) < 4.0 * binomial_sigma(0.25, n));
}

TEST_CASE("verification is complete: identical strings always accept") {
    const auto bank = GeneratorBank::from_seed(32, 8);
    for (std::uint64_t t = 0; t < 200; ++t) {
        const auto secret = BitString::random(32, 3 * t);
        const auto bits = BitString::random(32, 3 * t + 1);
        const auto assign = Assignment::from_secret(bank, secret);
        for (auto mode : {StreamMode::product, StreamMode::xor_bits}) {
            const std::size_t m = 1 + t % 90;
            const auto stream = encode_string(bank, assign, bits, m, t * 1000, mode);
            CHECK(stream.size() == m);
            const auto report = verify_stream(bank, assign, bits, stream, mode);
            CHECK(report.accepted);
            CHECK(report.steps_checked == m);
            CHECK(report.residual_false_accept == std::ldexp(1.0, -static_cast<int>(m)));
        }
    }
}

TEST_CASE("differing strings are accepted at rate 2^-m") {
    const auto bank = GeneratorBank::from_seed(8, 77);
    const std::uint64_t trials = 40000;
    for (std::size_t m = 1; m <= 6; ++m) {
        std::uint64_t accepts = 0;
        for (std::uint64_t t = 0; t < trials; ++t) {
            const std::uint64_t s = derive_seed(m, t, "test");
            const auto assign = Assignment::from_secret(bank, BitString::random(8, s));
            const auto x = BitString::random(8, s + 1);
            auto y = x;
            y.flip(t % 8);
            const auto stream = encode_string(bank, assign, x, m, s >> 8, StreamMode::product);
            if (verify_stream(bank, assign, y, stream).accepted) ++accepts;
        }
        const double p = std::ldexp(1.0, -static_cast<int>(m));
        CHECK(std::abs(static_cast<double>(accepts) / trials - p) < 4.0 * binomial_sigma(p, trials));
    }
}

TEST_CASE("verification stops at the first mismatch") {
    const auto bank = GeneratorBank::from_seed(4, 2);
    const auto assign = Assignment::from_secret(bank, BitString::from_binary("0110"));
    const auto x = BitString::from_binary("1010");
    auto stream = encode_string(bank, assign, x, 10, 50, StreamMode::product);
    stream.values[6] = static_cast<std::int8_t>(-stream.values[6]);
    const auto r = verify_stream(bank, assign, x, stream);
    CHECK_FALSE(r.accepted);
    REQUIRE(r.first_mismatch);
    CHECK(*r.first_mismatch == 6);
    CHECK(r.steps_checked == 7);
    CHECK(r.residual_false_accept == 0.0);
}

TEST_CASE("verification input errors") {
    const auto bank = GeneratorBank::from_seed(4, 2);
    const auto assign = Assignment::from_secret(bank, BitString(4));
    const auto x = BitString(4);
    CHECK_THROWS_AS(verify_stream(bank, assign, x, RtwStream{}), std::invalid_argument);
    const auto xs = encode_string(bank, assign, x, 5, 0, StreamMode::xor_bits);
    CHECK_THROWS_AS(verify_stream(bank, assign, x, xs, StreamMode::product), ProtocolError);
    RtwStream bad{StreamMode::product, 0, {1, 0, -1}};
    CHECK_THROWS_AS(verify_stream(bank, assign, x, bad), ProtocolError);
    CHECK_THROWS_AS(encode_string(bank, assign, x, 0, 0, StreamMode::product), std::invalid_argument);
}

TEST_CASE("false-accept probability") {
    CHECK(false_accept_probability(1) == 0.5);
    CHECK(false_accept_probability(12) == 1.0 / 4096.0);
    CHECK(false_accept_probability(83) == std::ldexp(1.0, -83));
    CHECK(false_accept_probability(83) == doctest::Approx(1.0339757656912846e-25));
    CHECK(false_accept_probability(83) < 1e-24);
}

TEST_CASE("wire format round trip and layout") {
    const auto bank = GeneratorBank::from_seed(6, 4);
    const auto assign = Assignment::from_secret(bank, BitString::random(6, 1));
    for (auto mode : {StreamMode::product, StreamMode::xor_bits}) {
        for (std::size_t m : {1, 7, 8, 9, 83}) {
            const auto s = encode_string(bank, assign, BitString::random(6, m), m, 0x0102030405060708ULL, mode);
            const auto wire = encode_wire(s);
            CHECK(wire.size() == 13 + (m + 7) / 8);
            CHECK(decode_wire(wire) == s);
        }
    }
    RtwStream s{StreamMode::product, 0x0102030405060708ULL, {-1, 1, 1, -1}};
    const auto w = encode_wire(s);
    const std::vector<std::uint8_t> expected{0, 0, 0, 0, 4, 1, 2, 3, 4, 5, 6, 7, 8, 0x90};
    CHECK(w == expected);
    RtwStream x{StreamMode::xor_bits, 0, {1, 0, 0}};
    CHECK(encode_wire(x).back() == 0x80);
}

TEST_CASE("malformed wire buffers are rejected") {
    RtwStream s{StreamMode::product, 5, {-1, 1, 1}};
    auto w = encode_wire(s);
    CHECK_THROWS_AS(decode_wire(std::vector<std::uint8_t>(w.begin(), w.end() - 1)), std::invalid_argument);
    auto padded = w;
    padded.back() |= 0x01;
    CHECK_THROWS_AS(decode_wire(padded), std::invalid_argument);
    auto bad_mode = w;
    bad_mode[0] = 7;
    CHECK_THROWS_AS(decode_wire(bad_mode), std::invalid_argument);
    auto zero_m = w;
    zero_m[4] = 0;
    CHECK_THROWS_AS(decode_wire(zero_m), std::invalid_argument);
    CHECK_THROWS_AS(decode_wire(std::vector<std::uint8_t>{}), std::invalid_argument);
}
