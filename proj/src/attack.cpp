#include "noisepuf/attack.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "noisepuf/parallel.hpp"
#include "noisepuf/seed.hpp"
#include "noisepuf/stats.hpp"

namespace noisepuf::attack {

using kljn::SwitchState;

namespace {

class VarianceDiscriminator final : public Discriminator {
public:
    std::string name() const override { return "variance"; }
    SwitchState guess_alice(const PublicObservation& obs) override {
        const double msq_u = noise::mean_square(obs.u);
        const double msq_i = noise::mean_square(obs.i);
        return msq_u > obs.params.r_low * obs.params.r_high * msq_i ? SwitchState::high : SwitchState::low;
    }
};

class SignCorrelationDiscriminator final : public Discriminator {
public:
    std::string name() const override { return "sign_correlation"; }
    SwitchState guess_alice(const PublicObservation& obs) override {
        double power = 0.0;
        for (std::size_t t = 0; t < obs.u.size(); ++t) power += obs.u[t] * obs.i[t];
        return power > 0.0 ? SwitchState::high : SwitchState::low;
    }
};

class CoinFlipDiscriminator final : public Discriminator {
public:
    explicit CoinFlipDiscriminator(std::uint64_t seed) : seed_(seed) {}
    std::string name() const override { return "coin_flip"; }
    SwitchState guess_alice(const PublicObservation&) override {
        return (counter_hash(seed_, draws_++) >> 63) != 0 ? SwitchState::high : SwitchState::low;
    }

private:
    std::uint64_t seed_;
    std::uint64_t draws_ = 0;
};

class LevelDiscriminator final : public Discriminator {
public:
    std::string name() const override { return "level"; }
    SwitchState guess_alice(const PublicObservation& obs) override {
        const double ll = obs.params.expected_msq_voltage(SwitchState::low, SwitchState::low);
        const double hh = obs.params.expected_msq_voltage(SwitchState::high, SwitchState::high);
        return noise::mean_square(obs.u) > std::sqrt(ll * hh) ? SwitchState::high : SwitchState::low;
    }
};

bool targeted(const kljn::KljnCycle& c, CycleSet set) {
    if (set == CycleSet::mixed) return c.kept && c.alice_bit != c.bob_bit;
    return c.alice_bit == c.bob_bit;
}

void finish_rate(AttackReport& r) {
    r.rate = r.trials == 0 ? 0.0 : static_cast<double>(r.successes) / static_cast<double>(r.trials);
}

// Per-transcript tallies for each discriminator, in cycle order.
std::vector<std::vector<std::uint8_t>> score_transcript(const kljn::ExchangeTranscript& tx,
                                                        std::vector<std::unique_ptr<Discriminator>>& eves) {
    std::vector<std::vector<std::uint8_t>> hits(eves.size());
    for (const auto& c : tx.cycles) {
        if (!targeted(c, CycleSet::mixed)) continue;
        if (c.u_trace.values.empty()) throw std::invalid_argument("passive_eve: transcript has no traces");
        const PublicObservation obs{c.u_trace.values, c.i_trace.values, tx.params};
        for (std::size_t e = 0; e < eves.size(); ++e) {
            hits[e].push_back(eves[e]->guess_alice(obs) == c.alice_bit ? 1 : 0);
        }
    }
    return hits;
}

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::unique_ptr<Discriminator> variance_discriminator() { return std::make_unique<VarianceDiscriminator>(); }
std::unique_ptr<Discriminator> sign_correlation_discriminator() {
    return std::make_unique<SignCorrelationDiscriminator>();
}
std::unique_ptr<Discriminator> coin_flip_discriminator(std::uint64_t seed) {
    return std::make_unique<CoinFlipDiscriminator>(seed);
}
std::unique_ptr<Discriminator> level_discriminator() { return std::make_unique<LevelDiscriminator>(); }

std::vector<std::unique_ptr<Discriminator>> shipped_discriminators() {
    std::vector<std::unique_ptr<Discriminator>> eves;
    eves.push_back(variance_discriminator());
    eves.push_back(sign_correlation_discriminator());
    return eves;
}

AttackReport passive_eve(std::span<const kljn::ExchangeTranscript> transcripts, Discriminator& eve, CycleSet set) {
    AttackReport r;
    r.kind = std::string(set == CycleSet::mixed ? "passive-eve:" : "passive-eve-same-state:") + eve.name();
    r.details.emplace_back("discriminator:" + eve.name(), 1.0);
    for (const auto& tx : transcripts) {
        for (const auto& c : tx.cycles) {
            if (!targeted(c, set)) continue;
            if (c.u_trace.values.empty()) throw std::invalid_argument("passive_eve: transcript has no traces");
            const PublicObservation obs{c.u_trace.values, c.i_trace.values, tx.params};
            ++r.trials;
            if (eve.guess_alice(obs) == c.alice_bit) ++r.successes;
        }
    }
    if (r.trials == 0) throw std::invalid_argument("passive_eve: no target cycles");
    finish_rate(r);
    if (set == CycleSet::mixed) {
        r.bound = 0.5;
        r.ci_half_width = 3.0 * binomial_sigma(0.5, r.trials);
        r.breached = std::abs(r.rate - 0.5) > r.ci_half_width;
    } else {
        r.bound = 1.0;
    }
    return r;
}

std::vector<AttackReport> run_passive_eve(const PassiveEveConfig& config) {
    if (config.mixed_cycles < 1) throw std::invalid_argument("run_passive_eve: mixed_cycles must be >= 1");
    config.params.validate();
    auto eves = shipped_discriminators();
    std::vector<AttackReport> reports(eves.size());
    for (std::size_t e = 0; e < eves.size(); ++e) {
        reports[e].kind = "passive-eve:" + eves[e]->name();
        reports[e].details.emplace_back("discriminator:" + eves[e]->name(), 1.0);
    }

    kljn::ExchangeOptions options;
    options.keep_traces = true;
    const unsigned batch = std::max(1u, config.jobs);
    std::uint64_t next_exchange = 0;
    std::uint64_t scored = 0;
    while (scored < config.mixed_cycles) {
        // Each exchange gets its own discriminator instances, so batches
        // score identically for any job count.
        std::vector<std::vector<std::vector<std::uint8_t>>> tallies(batch);
        parallel_for(batch, config.jobs, [&](std::size_t b) {
            const auto tx = kljn::run_exchange(config.bits_per_exchange, config.params,
                                               kljn::ExchangeSeeds::derive(config.seed, next_exchange + b), options);
            auto local = shipped_discriminators();
            tallies[b] = score_transcript(tx, local);
        });
        next_exchange += batch;
        for (const auto& per_exchange : tallies) {
            const std::size_t available = per_exchange.empty() ? 0 : per_exchange[0].size();
            const std::size_t take = std::min<std::uint64_t>(available, config.mixed_cycles - scored);
            for (std::size_t e = 0; e < eves.size(); ++e) {
                for (std::size_t k = 0; k < take; ++k) reports[e].successes += per_exchange[e][k];
                reports[e].trials += take;
            }
            scored += take;
            if (scored >= config.mixed_cycles) break;
        }
    }
    for (auto& r : reports) {
        finish_rate(r);
        r.bound = 0.5;
        r.ci_half_width = 3.0 * binomial_sigma(0.5, r.trials);
        r.breached = std::abs(r.rate - 0.5) > r.ci_half_width;
    }
    return reports;
}

AttackReport active_eve_inject(const ActiveEveConfig& config) {
    if (!(config.injection.amplitude_scale >= 0.0)) {
        throw std::invalid_argument("active_eve_inject: amplitude must be >= 0");
    }
    if (config.runs < 1 || config.injection.duration < 1) throw std::invalid_argument("active_eve_inject: empty attack");
    config.params.validate();

    struct RunTally {
        bool detected = false;
        std::uint64_t discarded_bits = 0;
        std::uint64_t undetected_informative = 0;
        std::uint64_t detected_but_kept = 0;
        bool aborted = false;
    };
    std::vector<RunTally> tallies(config.runs);
    parallel_for(config.runs, config.jobs, [&](std::size_t r) {
        kljn::ExchangeOptions options;
        options.injection = config.injection;
        const auto seeds = kljn::ExchangeSeeds::derive(config.seed, r);
        kljn::ExchangeTranscript tx;
        RunTally& t = tallies[r];
        try {
            tx = kljn::run_exchange(config.bits_per_exchange, config.params, seeds, options);
        } catch (const kljn::ExchangeAborted& e) {
            tx = e.partial();
            t.aborted = true;
        }
        for (const auto& c : tx.cycles) {
            if (c.alarm && c.kept) ++t.detected_but_kept;
            if (!config.injection.active_at(c.index)) continue;
            if (c.alarm) {
                t.detected = true;
                if (c.alice_bit != c.bob_bit) ++t.discarded_bits;
            } else if (c.kept && c.injected) {
                ++t.undetected_informative;
            }
        }
        t.detected = t.detected || t.aborted;
    });

    AttackReport r;
    r.kind = "active-eve";
    r.trials = config.runs;
    std::uint64_t discarded = 0;
    std::uint64_t informative = 0;
    std::uint64_t kept_alarms = 0;
    std::uint64_t aborted = 0;
    for (const auto& t : tallies) {
        r.successes += t.detected ? 1 : 0;
        discarded += t.discarded_bits;
        informative += t.undetected_informative;
        kept_alarms += t.detected_but_kept;
        aborted += t.aborted ? 1 : 0;
    }
    finish_rate(r);
    r.detection_rate = r.rate;
    if (config.injection.amplitude_scale > 0.0) {
        r.bound = config.required_detection;
        r.breached = r.rate < r.bound || kept_alarms > 0;
    } else {
        r.bound = config.max_false_alarm;
        r.breached = r.rate > r.bound || kept_alarms > 0;
    }
    r.ci_half_width = 3.0 * binomial_sigma(r.bound, r.trials);
    r.details = {{"amplitude_scale", config.injection.amplitude_scale},
                 {"discarded_mixed_bits", static_cast<double>(discarded)},
                 {"undetected_informative_cycles", static_cast<double>(informative)},
                 {"alarmed_cycles_kept", static_cast<double>(kept_alarms)},
                 {"aborted_exchanges", static_cast<double>(aborted)}};
    return r;
}

AttackReport brute_force(const puf::PufDevice& lock, const BruteForceConfig& config) {
    if (config.trials < 1) throw std::invalid_argument("brute_force: trials must be >= 1");
    if (lock.role != puf::Role::lock || lock.phase != puf::Phase::active) {
        throw std::invalid_argument("brute_force: target must be an active lock");
    }
    if (lock.variant == puf::Variant::ultra && config.guess == GuessKind::stream) {
        throw std::invalid_argument("brute_force: the ultra-strong response is a key, not a stream");
    }
    auto options = config.options;
    options.lockout_after.reset();
    const std::size_t n = lock.n_bits();

    std::vector<std::uint8_t> accepted(config.trials, 0);
    parallel_for(config.trials, config.jobs, [&](std::size_t t) {
        puf::PufDevice target = lock;
        target.session_counter = lock.session_counter + t * 2;
        auto link = transport::open_session(t);
        if (config.guess == GuessKind::key) {
            const auto guess = BitString::random(n, derive_seed(config.seed, t, "attack/key-guess"));
            auto fake = puf::counterfeit_key(target, guess, derive_seed(config.seed, t, "attack/entropy"));
            accepted[t] = puf::challenge(target, fake, link, options).verdict == puf::Verdict::accept ? 1 : 0;
            return;
        }
        const auto challenge = puf::lock_send_strong_challenge(target, target.stored, link.lock, options.m);
        (void)link.key.try_recv();
        nbl::RtwStream forged{nbl::StreamMode::product, challenge.start, {}};
        noise::RtwGenerator guesses(derive_seed(config.seed, t, "attack/stream-guess"));
        for (std::size_t s = 0; s < options.m; ++s) forged.values.push_back(static_cast<std::int8_t>(guesses.next()));
        link.key.send(transport::FrameType::stream_response, nbl::encode_wire(forged));
        const auto report = puf::lock_check_stream_response(target, target.stored, challenge, link.lock);
        accepted[t] = report && report->accepted ? 1 : 0;
    });

    AttackReport r;
    r.kind = config.guess == GuessKind::key ? "brute-force-key" : "brute-force-stream";
    r.variant = std::string(puf::to_string(lock.variant));
    r.trials = config.trials;
    for (auto a : accepted) r.successes += a;
    finish_rate(r);
    const double key_bound = std::ldexp(1.0, -static_cast<int>(n));
    const double stream_bound = nbl::false_accept_probability(options.m);
    if (config.guess == GuessKind::stream) {
        r.bound = stream_bound;
    } else if (lock.variant == puf::Variant::ultra) {
        r.bound = key_bound;
    } else {
        r.bound = key_bound + (1.0 - key_bound) * stream_bound;
    }
    r.ci_half_width = 3.0 * binomial_sigma(r.bound, r.trials);
    r.breached = r.rate > r.bound + r.ci_half_width;
    r.details = {{"n_bits", static_cast<double>(n)}, {"m", static_cast<double>(options.m)}};
    return r;
}

AttackReport clone_snapshot(const puf::PufDevice& key, const puf::PufDevice& lock,
                            const puf::ProtocolOptions& options) {
    if (lock.phase != puf::Phase::active) throw std::invalid_argument("clone_snapshot: devices must be active");
    const puf::PufDevice snapshot = key;

    // Clone first, on copies, so the legitimate pair is untouched.
    bool before_accepted = false;
    {
        auto lock_copy = lock;
        auto clone = snapshot;
        auto link = transport::open_session(1);
        before_accepted = puf::challenge(lock_copy, clone, link, options).verdict == puf::Verdict::accept;
    }
    bool after_accepted = false;
    bool legitimate_accepted = false;
    {
        auto lock_copy = lock;
        auto key_copy = key;
        auto legit = transport::open_session(2);
        legitimate_accepted = puf::challenge(lock_copy, key_copy, legit, options).verdict == puf::Verdict::accept;
        auto clone = snapshot;
        auto link = transport::open_session(3);
        after_accepted = puf::challenge(lock_copy, clone, link, options).verdict == puf::Verdict::accept;
    }

    AttackReport r;
    r.kind = "clone-snapshot";
    r.variant = std::string(puf::to_string(lock.variant));
    r.trials = 2;
    r.successes = (before_accepted ? 1 : 0) + (after_accepted ? 1 : 0);
    finish_rate(r);
    const bool renews = lock.variant == puf::Variant::ultra;
    r.bound = renews ? 0.5 : 1.0;
    r.breached = !legitimate_accepted || !before_accepted || after_accepted == renews;
    r.details = {{"clone_before_use_accepted", before_accepted ? 1.0 : 0.0},
                 {"legitimate_use_accepted", legitimate_accepted ? 1.0 : 0.0},
                 {"clone_after_use_accepted", after_accepted ? 1.0 : 0.0}};
    return r;
}

void write_reports_json(std::ostream& out, std::span<const AttackReport> reports) {
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["record"] = "attack_report";
        j["schema_version"] = 1;
        j["kind"] = r.kind;
        j["variant"] = r.variant;
        j["trials"] = r.trials;
        j["successes"] = r.successes;
        j["rate"] = r.rate;
        j["bound"] = r.bound;
        j["ci_half_width"] = r.ci_half_width;
        j["detection_rate"] = r.detection_rate ? nlohmann::ordered_json(*r.detection_rate) : nlohmann::ordered_json();
        j["breached"] = r.breached;
        nlohmann::ordered_json details = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.details) details[k] = v;
        j["details"] = std::move(details);
        out << j.dump() << '\n';
    }
}

void write_reports_csv(std::ostream& out, std::span<const AttackReport> reports) {
    out << "kind,variant,trials,successes,rate,bound,ci_half_width,detection_rate,breached\n";
    for (const auto& r : reports) {
        out << r.kind << ',' << r.variant << ',' << r.trials << ',' << r.successes << ',' << csv_double(r.rate) << ','
            << csv_double(r.bound) << ',' << csv_double(r.ci_half_width) << ','
            << (r.detection_rate ? csv_double(*r.detection_rate) : std::string()) << ',' << (r.breached ? 1 : 0)
            << '\n';
    }
}

}  // namespace noisepuf::attack
