#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "noisepuf/seed.hpp"

namespace noisepuf::noise {

/// Random telegraph wave: one fair +1/-1 amplitude per clock cycle.
///
/// The amplitude at cycle j is a pure function of (seed, j): the sign bit of
/// counter_hash(seed, j). Any cycle can be sampled directly, so verifiers
/// can address streams by absolute clock index.
class RtwGenerator {
public:
    explicit RtwGenerator(std::uint64_t seed, std::uint64_t cursor = 0) noexcept
        : seed_(seed), cursor_(cursor) {}

    int amplitude(std::uint64_t cycle) const noexcept {
        return (counter_hash(seed_, cycle) >> 63) != 0 ? -1 : 1;
    }
    /// Amplitude at the cursor, then advances it.
    int next() noexcept { return amplitude(cursor_++); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t cursor() const noexcept { return cursor_; }
    void seek(std::uint64_t cycle) noexcept { cursor_ = cycle; }

private:
    std::uint64_t seed_;
    std::uint64_t cursor_;
};

/// Lumped thermal-noise parameters. kt_eff folds Boltzmann's constant and the
/// effective temperature into one scalar; defaults make variance = 2R.
struct NoiseParams {
    double kt_eff = 1.0;
    double bandwidth = 0.5;
    std::size_t samples_per_cycle = 1000;

    void validate() const;
    /// 4 * kT_eff * R * bandwidth.
    double variance(double resistance) const { return 4.0 * kt_eff * resistance * bandwidth; }
};

enum class Unit : std::uint8_t { volt, ampere };

struct SampleTrace {
    std::vector<double> values;
    Unit unit = Unit::volt;
};

/// Gaussian source for Johnson-noise samples. mt19937_64 drives Boost's
/// ziggurat normal distribution, which is specified independently of the
/// standard library vendor, so equal seeds give bit-identical samples.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
    double standard_normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

/// One zero-mean Gaussian voltage sample with variance params.variance(resistance).
double johnson_sample(double resistance, const NoiseParams& params, NoiseStream& stream);

SampleTrace johnson_trace(double resistance, const NoiseParams& params, NoiseStream& stream,
                          std::size_t count);

/// Arithmetic mean of squared values. Throws on an empty input.
double mean_square(std::span<const double> values);
inline double mean_square(const SampleTrace& trace) { return mean_square(trace.values); }

/// Two-sample variance-ratio report for zero-mean traces.
///
/// ratio = msq(a)/msq(b); under equal variances n_a*msq(a)/sigma^2 is
/// chi-square with n_a degrees of freedom, so ratio ~ F(n_a, n_b). The
/// statistic is |ln ratio| (0 at the no-difference point) and p_value is
/// the two-sided F tail. Both are symmetric in the arguments.
struct VarianceRatioReport {
    double ratio = 1.0;
    double statistic = 0.0;
    double p_value = 1.0;

    bool rejects(double alpha) const { return p_value < alpha; }
};

VarianceRatioReport indistinguishability_test(std::span<const double> a, std::span<const double> b);
inline VarianceRatioReport indistinguishability_test(const SampleTrace& a, const SampleTrace& b) {
    return indistinguishability_test(a.values, b.values);
}

}  // namespace noisepuf::noise
