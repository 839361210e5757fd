#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <random>
#include <set>

#include "noisepuf/bits.hpp"
#include "noisepuf/noise.hpp"
#include "noisepuf/seed.hpp"
#include "noisepuf/stats.hpp"

using namespace noisepuf;
using namespace noisepuf::noise;

TEST_CASE("seed derivation is a pure function of its inputs") {
    CHECK(counter_hash(7, 3) == counter_hash(7, 3));
    CHECK(counter_hash(7, 3) != counter_hash(7, 4));
    CHECK(derive_seed(1, 0, "a") != derive_seed(1, 0, "b"));
    CHECK(derive_seed(1, 0, "a") != derive_seed(1, 1, "a"));
    CHECK(derive_seed(1, 0, "a") != derive_seed(2, 0, "a"));
    // FNV-1a reference values.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    static_assert(derive_seed(5, 6, "x") == derive_seed(5, 6, "x"));
}

TEST_CASE("ceil_log2 matches the smallest k with 2^k >= x") {
    for (std::uint64_t x = 1; x < 5000; ++x) {
        unsigned k = 0;
        while ((std::uint64_t{1} << k) < x) ++k;
        CHECK(ceil_log2(x) == k);
    }
    CHECK(ceil_log2(std::uint64_t{1} << 40) == 40);
    CHECK(ceil_log2((std::uint64_t{1} << 40) + 1) == 41);
    CHECK(ceil_log2(~std::uint64_t{0}) == 64);
}

TEST_CASE("RTW amplitudes are +-1, addressable and fair") {
    RtwGenerator g(42);
    long sum = 0;
    const int n = 200000;
    for (int j = 0; j < n; ++j) {
        const int a = g.next();
        REQUIRE((a == 1 || a == -1));
        sum += a;
    }
    CHECK(g.cursor() == static_cast<std::uint64_t>(n));
    // Mean of n fair signs has sigma 1/sqrt(n).
    CHECK(std::abs(static_cast<double>(sum) / n) < 5.0 / std::sqrt(double(n)));

    RtwGenerator h(42);
    h.seek(1234);
    CHECK(h.next() == g.amplitude(1234));
    CHECK(RtwGenerator(42, 99).next() == RtwGenerator(42).amplitude(99));
}

TEST_CASE("RTW 3-step patterns are uniform (chi-square)") {
    RtwGenerator g(2024);
    std::array<long, 8> counts{};
    const long blocks = 100000;
    for (long b = 0; b < blocks; ++b) {
        int code = 0;
        for (int k = 0; k < 3; ++k) code = code * 2 + (g.next() < 0 ? 1 : 0);
        ++counts[static_cast<std::size_t>(code)];
    }
    const double expected = blocks / 8.0;
    double chi2 = 0.0;
    for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(7);
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 1e-4);
}

TEST_CASE("Johnson samples have variance 4 kT R df") {
    const NoiseParams params;
    NoiseStream stream(9);
    for (double r : {1e3, 10e3, 100e3}) {
        const auto trace = johnson_trace(r, params, stream, 1000000);
        const double oracle = 4.0 * 1.0 * r * 0.5;
        // Sample variance of 1e6 normals has relative sigma sqrt(2/1e6) = 0.14%.
        CHECK(mean_square(trace) == doctest::Approx(oracle).epsilon(0.01));
    }
    NoiseParams hot;
    hot.kt_eff = 3.0;
    hot.bandwidth = 2.0;
    CHECK(hot.variance(10.0) == doctest::Approx(240.0));
}

TEST_CASE("noise input validation") {
    NoiseStream stream(1);
    const NoiseParams params;
    CHECK_THROWS_AS(johnson_sample(0.0, params, stream), std::invalid_argument);
    CHECK_THROWS_AS(johnson_sample(-5.0, params, stream), std::invalid_argument);
    CHECK_THROWS_AS(mean_square(std::vector<double>{}), std::invalid_argument);
    NoiseParams bad;
    bad.kt_eff = 0.0;
    CHECK_THROWS(bad.validate());
    bad = NoiseParams{};
    bad.samples_per_cycle = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("equal seeds give identical samples") {
    NoiseStream a(77), b(77), c(78);
    bool differs = false;
    for (int k = 0; k < 1000; ++k) {
        const double x = a.standard_normal();
        CHECK(x == b.standard_normal());
        differs = differs || x != c.standard_normal();
    }
    CHECK(differs);
}

TEST_CASE("indistinguishability test is calibrated under equal variances") {
    const NoiseParams params;
    NoiseStream stream(5);
    const int pairs = 2000;
    int rejects = 0;
    for (int p = 0; p < pairs; ++p) {
        const auto a = johnson_trace(9090.9, params, stream, 500);
        const auto b = johnson_trace(9090.9, params, stream, 700);
        if (indistinguishability_test(a, b).rejects(0.05)) ++rejects;
    }
    const double rate = static_cast<double>(rejects) / pairs;
    CHECK(std::abs(rate - 0.05) < 4.0 * binomial_sigma(0.05, pairs));
}

TEST_CASE("indistinguishability test separates different levels and is symmetric") {
    const NoiseParams params;
    NoiseStream stream(6);
    const auto ll = johnson_trace(5000.0, params, stream, 2000);
    const auto hh = johnson_trace(50000.0, params, stream, 2000);
    const auto r1 = indistinguishability_test(ll, hh);
    const auto r2 = indistinguishability_test(hh, ll);
    CHECK(r1.rejects(1e-6));
    CHECK(r1.p_value == doctest::Approx(r2.p_value));
    CHECK(r1.statistic == doctest::Approx(r2.statistic));
    CHECK(r1.ratio * r2.ratio == doctest::Approx(1.0));

    const std::vector<double> zeros(10, 0.0);
    CHECK(indistinguishability_test(zeros, zeros).p_value == 1.0);
    CHECK(indistinguishability_test(zeros, ll.values).p_value == 0.0);
}

TEST_CASE("BitString conversions") {
    const auto b = BitString::from_binary("1011000111");
    CHECK(b.size() == 10);
    CHECK(b.to_binary() == "1011000111");
    CHECK(b.to_hex() == "b1c");
    CHECK(BitString::from_hex("b1c", 10) == b);
    CHECK_THROWS(BitString::from_hex("b1d", 10));
    CHECK_THROWS(BitString::from_hex("b1c0", 10));
    CHECK_THROWS(BitString::from_binary("10x"));
    CHECK(BitString::from_packed(b.packed(), 10) == b);
    CHECK(b.popcount() == 6);
    CHECK(b.slice(2, 4).to_binary() == "1100");
    CHECK((b ^ b).popcount() == 0);
    CHECK(b.hamming_distance(BitString::from_binary("0011000110")) == 2);
    CHECK_THROWS(b.hamming_distance(BitString(3)));

    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 64; ++s) seen.insert(BitString::random(64, s).to_hex());
    CHECK(seen.size() == 64);
    CHECK(BitString::random(100, 3) == BitString::random(100, 3));
}
