#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisepuf/kljn.hpp"
#include "noisepuf/puf.hpp"

namespace noisepuf::attack {

struct AttackReport {
    std::string kind;
    std::string variant;
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    double rate = 0.0;
    double bound = 0.0;
    /// 3-sigma binomial half-width at the bound.
    double ci_half_width = 0.0;
    std::optional<double> detection_rate;
    /// The measured rate broke its bound: a security regression.
    bool breached = false;
    std::vector<std::pair<std::string, double>> details;
};

/// What a wiretapper sees of one cycle. No switch states.
struct PublicObservation {
    std::span<const double> u;
    std::span<const double> i;
    const kljn::KljnParams& params;
};

/// Passive eavesdropper strategy: guesses Alice's switch state from public
/// observables only.
class Discriminator {
public:
    virtual ~Discriminator() = default;
    virtual std::string name() const = 0;
    virtual kljn::SwitchState guess_alice(const PublicObservation& obs) = 0;
};

/// msq(U)/msq(I) against R_L R_H, the value both mixed states share ideally.
std::unique_ptr<Discriminator> variance_discriminator();
/// Sign of the mean instantaneous power <U I>.
std::unique_ptr<Discriminator> sign_correlation_discriminator();
std::unique_ptr<Discriminator> coin_flip_discriminator(std::uint64_t seed);
/// Same-state separator: msq(U) against sqrt(L_LL * L_HH).
std::unique_ptr<Discriminator> level_discriminator();
/// The discriminators every passive-Eve run reports on.
std::vector<std::unique_ptr<Discriminator>> shipped_discriminators();

enum class CycleSet : std::uint8_t { mixed, same_state };

/// Scores `eve` on the kept mixed cycles (or on the same-state cycles) of
/// the transcripts, which must carry traces. Ground truth is read here and
/// never handed to the discriminator.
AttackReport passive_eve(std::span<const kljn::ExchangeTranscript> transcripts, Discriminator& eve,
                         CycleSet set = CycleSet::mixed);

struct PassiveEveConfig {
    kljn::KljnParams params{};
    std::size_t mixed_cycles = 10000;
    std::size_t bits_per_exchange = 64;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// Generates exchanges and scores every shipped discriminator on exactly
/// `mixed_cycles` kept mixed cycles.
std::vector<AttackReport> run_passive_eve(const PassiveEveConfig& config);

struct ActiveEveConfig {
    kljn::KljnParams params{};
    kljn::Injection injection{kljn::InjectionKind::shunt_current, 10.0, 2, 1};
    std::size_t runs = 1000;
    std::size_t bits_per_exchange = 16;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    double required_detection = 0.99;
    double max_false_alarm = 1e-3;
};

/// Runs exchanges under injection. A run counts as detected when any cycle
/// of the injection window raised the comparison alarm (or the exchange
/// aborted on alarms). Zero amplitude measures the false-alarm rate.
AttackReport active_eve_inject(const ActiveEveConfig& config);

enum class GuessKind : std::uint8_t { key, stream };

struct BruteForceConfig {
    GuessKind guess = GuessKind::key;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    puf::ProtocolOptions options{};
};

/// Forged sessions against copies of `lock` with uniformly random guesses:
/// a guessed key (bound 2^-N, plus 2^-m for the stream variants) or a
/// random +-1 response stream (bound 2^-m). Lockout is disabled.
AttackReport brute_force(const puf::PufDevice& lock, const BruteForceConfig& config);

/// Copies the key state, presents the copy before and after one legitimate
/// session, and reports both outcomes. Ultra-strong keys must reject the
/// stale copy; the other variants accept it.
AttackReport clone_snapshot(const puf::PufDevice& key, const puf::PufDevice& lock,
                            const puf::ProtocolOptions& options);

void write_reports_json(std::ostream& out, std::span<const AttackReport> reports);
/// Columns: kind,variant,trials,successes,rate,bound,ci_half_width,detection_rate,breached
void write_reports_csv(std::ostream& out, std::span<const AttackReport> reports);

}  // namespace noisepuf::attack
