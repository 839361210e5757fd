#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "noisepuf/bits.hpp"
#include "noisepuf/noise.hpp"

namespace noisepuf::kljn {

/// Switch position of one party; high connects R_H. Key bits use H = 1.
enum class SwitchState : std::uint8_t { low = 0, high = 1 };

enum class StateClass : std::uint8_t { same_low, mixed, same_high };

constexpr SwitchState complement(SwitchState s) noexcept {
    return s == SwitchState::low ? SwitchState::high : SwitchState::low;
}
std::string_view to_string(StateClass c) noexcept;
StateClass true_class(SwitchState alice, SwitchState bob) noexcept;

/// Mean-square voltage decision boundaries, lower < upper.
struct Thresholds {
    double lower = 0.0;
    double upper = 0.0;
};

struct KljnParams {
    double r_low = 10e3;
    double r_high = 100e3;
    noise::NoiseParams noise{};
    /// Empty means geometric means of adjacent expected levels.
    std::optional<Thresholds> thresholds;
    /// Instantaneous-comparison tolerance, in units of the mixed-state RMS of
    /// the compared quantity (voltage or current).
    double epsilon_compare = 0.01;
    /// Every k-th sample of a cycle is exchanged for the comparison.
    std::size_t compare_subsample = 10;
    /// run_exchange aborts once alarms exceed this fraction of cycles.
    double abort_alarm_fraction = 0.25;
    /// Ratio of Bob's noise temperature to Alice's. 1 is the ideal loop;
    /// anything else is a deliberately non-ideal test fixture.
    double bob_temperature_ratio = 1.0;

    void validate() const;
    double resistance(SwitchState s) const noexcept { return s == SwitchState::high ? r_high : r_low; }
    /// 4 kT_eff df * R_A R_B / (R_A + R_B).
    double expected_msq_voltage(SwitchState alice, SwitchState bob) const noexcept;
    /// 4 kT_eff df / (R_A + R_B).
    double expected_msq_current(SwitchState alice, SwitchState bob) const noexcept;
    Thresholds resolved_thresholds() const;
    double voltage_tolerance() const;
    double current_tolerance() const;
};

/// Bits carried by one exchanged comparison value (an IEEE double).
inline constexpr std::uint64_t kComparisonValueBits = 64;

enum class InjectionKind : std::uint8_t { shunt_current, series_voltage };

/// Active eavesdropper perturbation: a constant current injected into the
/// wire node (shunt) or a constant voltage inserted in series, during
/// cycles [start_cycle, start_cycle + duration).
struct Injection {
    InjectionKind kind = InjectionKind::shunt_current;
    /// Multiple of the mixed-state noise RMS of the injected quantity.
    double amplitude_scale = 10.0;
    std::size_t start_cycle = 0;
    std::size_t duration = 1;

    bool active_at(std::size_t cycle) const noexcept {
        return cycle >= start_cycle && cycle - start_cycle < duration;
    }
    double absolute_amplitude(const KljnParams& params) const;
};

/// Absolute perturbation applied during one cycle.
struct Perturbation {
    InjectionKind kind = InjectionKind::shunt_current;
    double amplitude = 0.0;
};

/// Subsampled instantaneous values measured at one end of the wire.
struct EndProbe {
    std::vector<double> u;
    std::vector<double> i;
};

struct KljnCycle {
    std::size_t index = 0;
    SwitchState alice_bit = SwitchState::low;
    SwitchState bob_bit = SwitchState::low;
    /// Channel voltage and loop current at Alice's end; filled only when
    /// traces are kept.
    noise::SampleTrace u_trace{{}, noise::Unit::volt};
    noise::SampleTrace i_trace{{}, noise::Unit::ampere};
    double msq_u = 0.0;
    double msq_i = 0.0;
    double bob_msq_u = 0.0;
    StateClass classification = StateClass::same_low;
    StateClass bob_classification = StateClass::same_low;
    /// kept = mixed on both sides, no alarm, no estimation error.
    bool kept = false;
    bool alarm = false;
    bool estimation_error = false;
    bool injected = false;
    std::optional<std::size_t> first_alarm_sample;
    std::size_t comparison_values = 0;
    EndProbe alice_probe;
    EndProbe bob_probe;
};

struct CycleOptions {
    bool keep_traces = false;
    bool record_probes = false;
    std::optional<Perturbation> perturbation;
};

double select_resistor(SwitchState bit, const KljnParams& params);

/// Simulates one clock period of the loop. Per tick, with source samples
/// U_A, U_B: I = (U_A - U_B)/(R_A + R_B) and U_ch = (U_A R_B + U_B R_A)/(R_A + R_B).
KljnCycle simulate_cycle(SwitchState alice_bit, SwitchState bob_bit, const KljnParams& params,
                         noise::NoiseStream& alice_noise, noise::NoiseStream& bob_noise,
                         const CycleOptions& options = {});

StateClass classify_state(double msq_voltage, const KljnParams& params);

struct PeerDeduction {
    enum class Kind : std::uint8_t { peer, discard, estimation_error };
    Kind kind = Kind::discard;
    SwitchState peer = SwitchState::low;
};

/// Mixed gives the complement of our own bit. A same-state class matching
/// our own bit is discarded; one contradicting it is an estimation error.
PeerDeduction deduce_peer_bit(SwitchState own, StateClass cls) noexcept;

struct AlarmReport {
    bool alarm = false;
    std::optional<std::size_t> first_index;
    std::size_t values_exchanged = 0;
};

/// Defense against invasive attacks: compare the instantaneous voltage and
/// current seen at both ends on every compare_subsample-th sample.
AlarmReport compare_instantaneous(std::span<const double> u_a, std::span<const double> i_a,
                                  std::span<const double> u_b, std::span<const double> i_b,
                                  const KljnParams& params);

/// ceil(log2 F): secure bits spent authenticating F public bits. F >= 1.
unsigned authentication_budget(std::uint64_t f_public_bits);

struct ExchangeSeeds {
    std::uint64_t alice_switch = 0;
    std::uint64_t bob_switch = 0;
    std::uint64_t alice_noise = 0;
    std::uint64_t bob_noise = 0;

    static ExchangeSeeds derive(std::uint64_t master, std::uint64_t index);
    friend bool operator==(const ExchangeSeeds&, const ExchangeSeeds&) = default;
};

struct ExchangeOptions {
    bool keep_traces = false;
    bool record_probes = false;
    /// Keep exchanging until n_bits + ceil(log2 F) bits are kept, the extra
    /// bits being spent on authenticating the comparison traffic.
    bool reserve_authentication_bits = true;
    std::optional<Injection> injection;
    /// 0 selects 64 * n_bits + 256.
    std::size_t max_cycles = 0;
};

struct ExchangeTranscript {
    KljnParams params;
    ExchangeSeeds seeds;
    std::size_t n_bits = 0;
    std::vector<KljnCycle> cycles;
    /// Key bit = Alice's switch state in each kept cycle; Bob derives it as
    /// the complement of his own.
    BitString key_alice;
    BitString key_bob;
    std::size_t kept_count = 0;
    std::size_t discarded_count = 0;
    std::size_t alarm_count = 0;
    std::size_t estimation_errors = 0;
    std::uint64_t public_bits = 0;
    unsigned authentication_bits_consumed = 0;
};

class ExchangeAborted : public std::runtime_error {
public:
    ExchangeAborted(const std::string& what, ExchangeTranscript partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const ExchangeTranscript& partial() const noexcept { return partial_; }

private:
    ExchangeTranscript partial_;
};

/// Runs cycles until n_bits (plus the authentication reserve) are kept.
/// Throws ExchangeAborted when the alarm rate crosses the abort threshold or
/// the cycle cap is reached.
ExchangeTranscript run_exchange(std::size_t n_bits, const KljnParams& params, const ExchangeSeeds& seeds,
                                const ExchangeOptions& options = {});

/// Line-delimited JSON: a header record (params, seeds), one record per
/// cycle with fields index, class, kept, alarm, msq_u, msq_i, and a summary.
void write_transcript(std::ostream& out, const ExchangeTranscript& transcript);

}  // namespace noisepuf::kljn
