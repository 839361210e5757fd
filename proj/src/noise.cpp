#include "noisepuf/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/fisher_f.hpp>

namespace noisepuf::noise {

void NoiseParams::validate() const {
    if (!(kt_eff > 0.0)) throw std::invalid_argument("noise: kt_eff must be positive");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("noise: bandwidth must be positive");
    if (samples_per_cycle < 1) throw std::invalid_argument("noise: samples_per_cycle must be >= 1");
}

double johnson_sample(double resistance, const NoiseParams& params, NoiseStream& stream) {
    if (!(resistance > 0.0)) throw std::invalid_argument("johnson_sample: resistance must be positive");
    return std::sqrt(params.variance(resistance)) * stream.standard_normal();
}

SampleTrace johnson_trace(double resistance, const NoiseParams& params, NoiseStream& stream,
                          std::size_t count) {
    if (!(resistance > 0.0)) throw std::invalid_argument("johnson_trace: resistance must be positive");
    const double sigma = std::sqrt(params.variance(resistance));
    SampleTrace trace;
    trace.values.resize(count);
    for (auto& v : trace.values) v = sigma * stream.standard_normal();
    return trace;
}

double mean_square(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_square: empty trace");
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return sum / static_cast<double>(values.size());
}

VarianceRatioReport indistinguishability_test(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("indistinguishability_test: empty trace");
    const double msq_a = mean_square(a);
    const double msq_b = mean_square(b);
    VarianceRatioReport report;
    if (msq_a == 0.0 && msq_b == 0.0) return report;
    if (msq_a == 0.0 || msq_b == 0.0) {
        report.ratio = msq_a == 0.0 ? 0.0 : HUGE_VAL;
        report.statistic = HUGE_VAL;
        report.p_value = 0.0;
        return report;
    }
    report.ratio = msq_a / msq_b;
    report.statistic = std::abs(std::log(report.ratio));

    const boost::math::fisher_f_distribution<double> f(static_cast<double>(a.size()),
                                                       static_cast<double>(b.size()));
    const double lower = boost::math::cdf(f, report.ratio);
    const double upper = boost::math::cdf(boost::math::complement(f, report.ratio));
    report.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
    return report;
}

}  // namespace noisepuf::noise
