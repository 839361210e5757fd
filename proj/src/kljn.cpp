#include "noisepuf/kljn.hpp"

#include <cmath>
#include <string>

#include "noisepuf/seed.hpp"
#include "noisepuf/stats.hpp"

namespace noisepuf::kljn {

std::string_view to_string(StateClass c) noexcept {
    switch (c) {
        case StateClass::same_low: return "same_low";
        case StateClass::mixed: return "mixed";
        case StateClass::same_high: return "same_high";
    }
    return "?";
}

StateClass true_class(SwitchState alice, SwitchState bob) noexcept {
    if (alice != bob) return StateClass::mixed;
    return alice == SwitchState::low ? StateClass::same_low : StateClass::same_high;
}

void KljnParams::validate() const {
    noise.validate();
    if (!(r_low > 0.0) || !(r_low < r_high)) throw std::invalid_argument("kljn: require 0 < r_low < r_high");
    if (!(epsilon_compare >= 0.0)) throw std::invalid_argument("kljn: epsilon_compare must be >= 0");
    if (compare_subsample < 1) throw std::invalid_argument("kljn: compare_subsample must be >= 1");
    if (!(abort_alarm_fraction >= 0.0)) throw std::invalid_argument("kljn: abort_alarm_fraction must be >= 0");
    if (!(bob_temperature_ratio > 0.0)) throw std::invalid_argument("kljn: bob_temperature_ratio must be positive");
    if (thresholds) {
        const double ll = expected_msq_voltage(SwitchState::low, SwitchState::low);
        const double hh = expected_msq_voltage(SwitchState::high, SwitchState::high);
        if (!(thresholds->lower < thresholds->upper)) throw std::invalid_argument("kljn: thresholds must satisfy t1 < t2");
        if (!(thresholds->lower > ll) || !(thresholds->upper < hh)) {
            throw std::invalid_argument("kljn: thresholds must lie strictly between the LL and HH levels");
        }
    }
}

double KljnParams::expected_msq_voltage(SwitchState alice, SwitchState bob) const noexcept {
    const double ra = resistance(alice);
    const double rb = resistance(bob);
    return noise.variance(1.0) * ra * rb / (ra + rb);
}

double KljnParams::expected_msq_current(SwitchState alice, SwitchState bob) const noexcept {
    return noise.variance(1.0) / (resistance(alice) + resistance(bob));
}

Thresholds KljnParams::resolved_thresholds() const {
    if (thresholds) return *thresholds;
    const double ll = expected_msq_voltage(SwitchState::low, SwitchState::low);
    const double mix = expected_msq_voltage(SwitchState::low, SwitchState::high);
    const double hh = expected_msq_voltage(SwitchState::high, SwitchState::high);
    return {std::sqrt(ll * mix), std::sqrt(mix * hh)};
}

double KljnParams::voltage_tolerance() const {
    return epsilon_compare * std::sqrt(expected_msq_voltage(SwitchState::low, SwitchState::high));
}

double KljnParams::current_tolerance() const {
    return epsilon_compare * std::sqrt(expected_msq_current(SwitchState::low, SwitchState::high));
}

double Injection::absolute_amplitude(const KljnParams& params) const {
    const double rms = kind == InjectionKind::shunt_current
                           ? std::sqrt(params.expected_msq_current(SwitchState::low, SwitchState::high))
                           : std::sqrt(params.expected_msq_voltage(SwitchState::low, SwitchState::high));
    return amplitude_scale * rms;
}

double select_resistor(SwitchState bit, const KljnParams& params) { return params.resistance(bit); }

StateClass classify_state(double msq_voltage, const KljnParams& params) {
    if (!(msq_voltage >= 0.0)) throw std::invalid_argument("classify_state: negative mean square");
    const auto t = params.resolved_thresholds();
    if (msq_voltage < t.lower) return StateClass::same_low;
    if (msq_voltage > t.upper) return StateClass::same_high;
    return StateClass::mixed;
}

PeerDeduction deduce_peer_bit(SwitchState own, StateClass cls) noexcept {
    using Kind = PeerDeduction::Kind;
    switch (cls) {
        case StateClass::mixed: return {Kind::peer, complement(own)};
        case StateClass::same_low:
            return {own == SwitchState::low ? Kind::discard : Kind::estimation_error, SwitchState::low};
        case StateClass::same_high:
            return {own == SwitchState::high ? Kind::discard : Kind::estimation_error, SwitchState::high};
    }
    return {Kind::estimation_error, own};
}

namespace {

bool comparison_fails(double ua, double ia, double ub, double ib, double tol_u, double tol_i) noexcept {
    return std::abs(ua - ub) > tol_u || std::abs(ia - ib) > tol_i;
}

std::size_t subsampled_count(std::size_t samples, std::size_t k) { return (samples + k - 1) / k; }

}  // namespace

AlarmReport compare_instantaneous(std::span<const double> u_a, std::span<const double> i_a,
                                  std::span<const double> u_b, std::span<const double> i_b,
                                  const KljnParams& params) {
    if (u_a.size() != i_a.size() || u_a.size() != u_b.size() || u_a.size() != i_b.size()) {
        throw std::invalid_argument("compare_instantaneous: trace length mismatch");
    }
    if (params.compare_subsample < 1) throw std::invalid_argument("compare_instantaneous: compare_subsample must be >= 1");
    const double tol_u = params.voltage_tolerance();
    const double tol_i = params.current_tolerance();
    AlarmReport report;
    for (std::size_t t = 0; t < u_a.size(); t += params.compare_subsample) {
        report.values_exchanged += 4;
        if (!report.alarm && comparison_fails(u_a[t], i_a[t], u_b[t], i_b[t], tol_u, tol_i)) {
            report.alarm = true;
            report.first_index = t;
        }
    }
    return report;
}

unsigned authentication_budget(std::uint64_t f_public_bits) {
    if (f_public_bits < 1) throw std::invalid_argument("authentication_budget: F must be >= 1");
    return ceil_log2(f_public_bits);
}

KljnCycle simulate_cycle(SwitchState alice_bit, SwitchState bob_bit, const KljnParams& params,
                         noise::NoiseStream& alice_noise, noise::NoiseStream& bob_noise,
                         const CycleOptions& options) {
    params.validate();
    KljnCycle cycle;
    cycle.alice_bit = alice_bit;
    cycle.bob_bit = bob_bit;
    cycle.injected = options.perturbation.has_value() && options.perturbation->amplitude != 0.0;

    const std::size_t samples = params.noise.samples_per_cycle;
    const std::size_t k = params.compare_subsample;
    const double ra = select_resistor(alice_bit, params);
    const double rb = select_resistor(bob_bit, params);
    const double sigma_a = std::sqrt(params.noise.variance(ra));
    const double sigma_b = std::sqrt(params.noise.variance(rb) * params.bob_temperature_ratio);
    const double r_sum = ra + rb;
    const double g_sum = 1.0 / ra + 1.0 / rb;
    const double tol_u = params.voltage_tolerance();
    const double tol_i = params.current_tolerance();

    const bool shunt = cycle.injected && options.perturbation->kind == InjectionKind::shunt_current;
    const bool series = cycle.injected && options.perturbation->kind == InjectionKind::series_voltage;
    const double inject = cycle.injected ? options.perturbation->amplitude : 0.0;

    if (options.keep_traces) {
        cycle.u_trace.values.resize(samples);
        cycle.i_trace.values.resize(samples);
    }
    if (options.record_probes) {
        const std::size_t n = subsampled_count(samples, k);
        for (auto* probe : {&cycle.alice_probe, &cycle.bob_probe}) {
            probe->u.reserve(n);
            probe->i.reserve(n);
        }
    }

    double sum_u2 = 0.0;
    double sum_i2 = 0.0;
    double sum_bob_u2 = 0.0;
    for (std::size_t t = 0; t < samples; ++t) {
        const double ua_src = sigma_a * alice_noise.standard_normal();
        const double ub_src = sigma_b * bob_noise.standard_normal();
        double u_alice;
        double u_bob;
        double i_alice;
        double i_bob;
        if (shunt) {
            // Node analysis with Eve's current source at the wire node.
            const double u = (ua_src / ra + ub_src / rb + inject) / g_sum;
            u_alice = u_bob = u;
            i_alice = (ua_src - u) / ra;
            i_bob = (u - ub_src) / rb;
        } else {
            const double i = (ua_src - ub_src - (series ? inject : 0.0)) / r_sum;
            i_alice = i_bob = i;
            // Without a series source this equals (U_A R_B + U_B R_A)/(R_A + R_B).
            u_alice = ua_src - i * ra;
            u_bob = series ? ub_src + i * rb : u_alice;
        }
        sum_u2 += u_alice * u_alice;
        sum_i2 += i_alice * i_alice;
        sum_bob_u2 += u_bob * u_bob;
        if (options.keep_traces) {
            cycle.u_trace.values[t] = u_alice;
            cycle.i_trace.values[t] = i_alice;
        }
        if (t % k == 0) {
            cycle.comparison_values += 4;
            if (options.record_probes) {
                cycle.alice_probe.u.push_back(u_alice);
                cycle.alice_probe.i.push_back(i_alice);
                cycle.bob_probe.u.push_back(u_bob);
                cycle.bob_probe.i.push_back(i_bob);
            }
            if (!cycle.alarm && comparison_fails(u_alice, i_alice, u_bob, i_bob, tol_u, tol_i)) {
                cycle.alarm = true;
                cycle.first_alarm_sample = t;
            }
        }
    }
    const double n = static_cast<double>(samples);
    cycle.msq_u = sum_u2 / n;
    cycle.msq_i = sum_i2 / n;
    cycle.bob_msq_u = sum_bob_u2 / n;
    cycle.classification = classify_state(cycle.msq_u, params);
    cycle.bob_classification = classify_state(cycle.bob_msq_u, params);

    using Kind = PeerDeduction::Kind;
    const auto alice_view = deduce_peer_bit(alice_bit, cycle.classification);
    const auto bob_view = deduce_peer_bit(bob_bit, cycle.bob_classification);
    cycle.estimation_error = alice_view.kind == Kind::estimation_error || bob_view.kind == Kind::estimation_error ||
                             cycle.classification != cycle.bob_classification;
    cycle.kept = cycle.classification == StateClass::mixed && !cycle.alarm && !cycle.estimation_error;
    return cycle;
}

ExchangeSeeds ExchangeSeeds::derive(std::uint64_t master, std::uint64_t index) {
    return {derive_seed(master, index, "kljn/alice-switch"), derive_seed(master, index, "kljn/bob-switch"),
            derive_seed(master, index, "kljn/alice-noise"), derive_seed(master, index, "kljn/bob-noise")};
}

namespace {

SwitchState switch_at(std::uint64_t seed, std::size_t cycle) {
    return (counter_hash(seed, cycle) >> 63) != 0 ? SwitchState::high : SwitchState::low;
}

}  // namespace

ExchangeTranscript run_exchange(std::size_t n_bits, const KljnParams& params, const ExchangeSeeds& seeds,
                                const ExchangeOptions& options) {
    if (n_bits < 1) throw std::invalid_argument("run_exchange: n_bits must be >= 1");
    params.validate();

    ExchangeTranscript tx;
    tx.params = params;
    tx.seeds = seeds;
    tx.n_bits = n_bits;
    const std::size_t max_cycles = options.max_cycles != 0 ? options.max_cycles : 64 * n_bits + 256;

    noise::NoiseStream alice_noise(seeds.alice_noise);
    noise::NoiseStream bob_noise(seeds.bob_noise);
    BitString kept_alice;
    BitString kept_bob;

    for (std::size_t c = 0;; ++c) {
        if (c >= max_cycles) {
            throw ExchangeAborted("run_exchange: cycle cap reached after " + std::to_string(c) + " cycles with " +
                                      std::to_string(tx.kept_count) + " kept bits",
                                  std::move(tx));
        }
        CycleOptions cycle_options{options.keep_traces, options.record_probes, std::nullopt};
        if (options.injection && options.injection->active_at(c)) {
            cycle_options.perturbation =
                Perturbation{options.injection->kind, options.injection->absolute_amplitude(params)};
        }
        auto cycle = simulate_cycle(switch_at(seeds.alice_switch, c), switch_at(seeds.bob_switch, c), params,
                                    alice_noise, bob_noise, cycle_options);
        cycle.index = c;
        tx.public_bits += cycle.comparison_values * kComparisonValueBits;
        if (cycle.alarm) ++tx.alarm_count;
        if (cycle.estimation_error) ++tx.estimation_errors;
        if (cycle.kept) {
            ++tx.kept_count;
            kept_alice.push_back(cycle.alice_bit == SwitchState::high);
            kept_bob.push_back(complement(cycle.bob_bit) == SwitchState::high);
        } else {
            ++tx.discarded_count;
        }
        tx.cycles.push_back(std::move(cycle));

        const std::size_t cycles_run = c + 1;
        if (cycles_run >= 8 &&
            static_cast<double>(tx.alarm_count) > params.abort_alarm_fraction * static_cast<double>(cycles_run)) {
            throw ExchangeAborted("run_exchange: alarm rate " + std::to_string(tx.alarm_count) + "/" +
                                      std::to_string(cycles_run) + " above abort threshold",
                                  std::move(tx));
        }
        const std::size_t target =
            n_bits + (options.reserve_authentication_bits ? authentication_budget(tx.public_bits) : 0U);
        if (tx.kept_count >= target) break;
    }
    tx.authentication_bits_consumed = authentication_budget(tx.public_bits);
    tx.key_alice = kept_alice.slice(0, n_bits);
    tx.key_bob = kept_bob.slice(0, n_bits);
    return tx;
}

}  // namespace noisepuf::kljn
