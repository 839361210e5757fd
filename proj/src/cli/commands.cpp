#include "noisepuf/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "noisepuf/attack.hpp"
#include "noisepuf/nbl.hpp"
#include "noisepuf/parallel.hpp"
#include "noisepuf/seed.hpp"
#include "noisepuf/stats.hpp"

namespace noisepuf::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

bool csv(const ExperimentConfig& c) { return c.format == "csv"; }

fs::path output_path(const ExperimentConfig& c, const std::string& stem) {
    fs::create_directories(c.out);
    return fs::path(c.out) / (stem + (csv(c) ? ".csv" : ".jsonl"));
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

void write_config_record(const ExperimentConfig& c) {
    fs::create_directories(c.out);
    auto f = open_output(fs::path(c.out) / "config.json");
    f << to_json(c);
}

nbl::StreamMode stream_mode(const ExperimentConfig& c) {
    return c.stream_mode == "xor" ? nbl::StreamMode::xor_bits : nbl::StreamMode::product;
}

std::uint64_t manufacturer_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 0, "cli/manufacturer"); }
std::uint64_t physical_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 0, "cli/physical"); }

// Provisioned pair, initialized unless the variant has no initialization.
puf::DevicePair ready_pair(const ExperimentConfig& c, const puf::ProtocolOptions& options) {
    const auto variant = puf::parse_variant(c.variant);
    auto pair = puf::provision(variant, c.n_bits, manufacturer_seed(c), physical_seed(c));
    if (variant != puf::Variant::simple) {
        auto link = transport::open_session(0);
        const auto s = puf::initialize(pair.key, pair.lock, link, options);
        if (s.verdict != puf::Verdict::accept) throw std::runtime_error("initialization failed: " + s.reason);
    }
    return pair;
}

void write_exchange_csv(std::ostream& f, const kljn::ExchangeTranscript& tx) {
    f << "index,alice,bob,class,kept,alarm,estimation_error,msq_u,msq_i\n";
    for (const auto& cy : tx.cycles) {
        f << cy.index << ',' << static_cast<int>(cy.alice_bit) << ',' << static_cast<int>(cy.bob_bit) << ','
          << kljn::to_string(cy.classification) << ',' << cy.kept << ',' << cy.alarm << ',' << cy.estimation_error
          << ',' << num(cy.msq_u) << ',' << num(cy.msq_i) << '\n';
    }
}

}  // namespace

int cmd_exchange(const ExperimentConfig& c, std::ostream& out) {
    const auto params = kljn_params(c);
    const auto seeds = kljn::ExchangeSeeds::derive(c.seed, 0);
    kljn::ExchangeTranscript tx;
    bool aborted = false;
    try {
        tx = kljn::run_exchange(c.n_bits, params, seeds);
    } catch (const kljn::ExchangeAborted& e) {
        tx = e.partial();
        aborted = true;
        out << "aborted " << e.what() << '\n';
    }
    write_config_record(c);
    {
        auto f = open_output(output_path(c, "exchange"));
        if (csv(c)) {
            write_exchange_csv(f, tx);
        } else {
            kljn::write_transcript(f, tx);
        }
    }
    const double cycles = static_cast<double>(tx.cycles.size());
    const bool agree = !aborted && tx.key_alice == tx.key_bob;
    out << "cycles " << tx.cycles.size() << '\n'
        << "kept " << tx.kept_count << '\n'
        << "kept_fraction " << num(cycles > 0 ? static_cast<double>(tx.kept_count) / cycles : 0.0) << '\n'
        << "discard_rate " << num(cycles > 0 ? static_cast<double>(tx.discarded_count) / cycles : 0.0) << '\n'
        << "alarms " << tx.alarm_count << '\n'
        << "estimation_errors " << tx.estimation_errors << '\n'
        << "public_bits " << tx.public_bits << '\n'
        << "authentication_bits " << tx.authentication_bits_consumed << '\n'
        << "key_alice " << tx.key_alice.to_hex() << '\n'
        << "key_bob " << tx.key_bob.to_hex() << '\n'
        << "keys_equal " << (agree ? "yes" : "no") << '\n';
    return agree ? kExitOk : kExitBoundFailed;
}

std::vector<VerifyRow> verify_sweep(const ExperimentConfig& c) {
    const auto mode = stream_mode(c);
    const bool identical = c.verify_mode == "identical";
    const auto bank = nbl::GeneratorBank::from_seed(c.n_bits, derive_seed(c.seed, 0, "cli/verify-bank"));
    std::vector<VerifyRow> rows;
    for (std::size_t m = c.m_min; m <= c.m; ++m) {
        const std::uint64_t point_seed = derive_seed(c.seed, m, "cli/verify-m");
        std::vector<std::uint8_t> accepted(c.trials, 0);
        parallel_for(c.trials, c.jobs, [&](std::size_t t) {
            const std::uint64_t ts = derive_seed(point_seed, t, "cli/verify-trial");
            const auto secret = BitString::random(c.n_bits, derive_seed(ts, 0, "secret"));
            const auto assignment = nbl::Assignment::from_secret(bank, secret);
            const auto sent = BitString::random(c.n_bits, derive_seed(ts, 1, "sent"));
            BitString local = sent;
            if (!identical) {
                // Uniform nonzero difference.
                BitString diff(c.n_bits);
                for (std::uint64_t draw = 0; diff.popcount() == 0; ++draw) {
                    diff = BitString::random(c.n_bits, derive_seed(ts, draw, "difference"));
                }
                local ^= diff;
            }
            const std::uint64_t start = counter_hash(ts, 2) >> 2;
            const auto stream = nbl::encode_string(bank, assignment, sent, m, start, mode);
            accepted[t] = nbl::verify_stream(bank, assignment, local, stream, mode).accepted ? 1 : 0;
        });
        VerifyRow row;
        row.m = m;
        row.trials = c.trials;
        for (auto a : accepted) row.accepts += a;
        row.rate = static_cast<double>(row.accepts) / static_cast<double>(row.trials);
        row.bound = identical ? 1.0 : nbl::false_accept_probability(m);
        row.ci_half_width = 3.0 * binomial_sigma(row.bound, row.trials);
        row.within = identical ? row.accepts == row.trials : std::abs(row.rate - row.bound) <= row.ci_half_width;
        rows.push_back(row);
    }
    return rows;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& out) {
    const auto rows = verify_sweep(c);
    write_config_record(c);
    std::ostringstream table;
    table << "m,trials,false_accepts,rate,bound,ci_half_width,within\n";
    for (const auto& r : rows) {
        table << r.m << ',' << r.trials << ',' << r.accepts << ',' << num(r.rate) << ',' << num(r.bound) << ','
              << num(r.ci_half_width) << ',' << (r.within ? 1 : 0) << '\n';
    }
    {
        auto f = open_output(output_path(c, "verify"));
        if (csv(c)) {
            f << table.str();
        } else {
            for (const auto& r : rows) {
                Json j;
                j["record"] = "verify";
                j["schema_version"] = 1;
                j["mode"] = c.verify_mode;
                j["m"] = r.m;
                j["trials"] = r.trials;
                j["accepts"] = r.accepts;
                j["rate"] = r.rate;
                j["bound"] = r.bound;
                j["ci_half_width"] = r.ci_half_width;
                j["within"] = r.within;
                f << j.dump() << '\n';
            }
        }
    }
    out << table.str();
    if (c.m_min == c.m) {
        out << "residual_false_accept 2^-" << c.m << " = " << num(nbl::false_accept_probability(c.m)) << '\n';
    }
    bool ok = true;
    for (const auto& r : rows) ok = ok && r.within;
    return ok ? kExitOk : kExitBoundFailed;
}

int cmd_puf(const ExperimentConfig& c, std::ostream& out) {
    const auto options = protocol_options(c);
    const auto variant = puf::parse_variant(c.variant);
    auto pair = puf::provision(variant, c.n_bits, manufacturer_seed(c), physical_seed(c));
    auto& key = pair.key;
    auto& lock = pair.lock;

    struct Event {
        std::string event;
        std::size_t index = 0;
        std::string verdict;
        std::string expected;
        std::string reason;
        bool renewed = false;
        std::uint64_t public_bits = 0;
        unsigned authentication_bits = 0;
    };
    std::vector<Event> events;
    bool ok = true;
    const auto record = [&](const std::string& event, std::size_t index, const puf::ChallengeSession& s,
                            puf::Verdict expected) {
        Event e{event,
                index,
                std::string(puf::to_string(s.verdict)),
                std::string(puf::to_string(expected)),
                s.reason,
                s.renewed,
                s.public_bits,
                s.authentication_bits};
        ok = ok && s.verdict == expected;
        out << event << ' ' << index << ' ' << e.verdict << " (expected " << e.expected << ")"
            << " key_generation " << key.stored.generation << " lock_generation " << lock.stored.generation;
        if (!s.reason.empty()) out << " reason \"" << s.reason << '"';
        out << '\n';
        events.push_back(std::move(e));
    };

    std::uint64_t session_id = 0;
    if (variant != puf::Variant::simple) {
        auto link = transport::open_session(session_id++);
        record("initialize", 0, puf::initialize(key, lock, link, options), puf::Verdict::accept);
    }
    for (std::size_t s = 1; s <= c.sessions; ++s) {
        auto link = transport::open_session(session_id++);
        record("challenge", s, puf::challenge(lock, key, link, options), puf::Verdict::accept);
    }

    std::optional<attack::AttackReport> snapshot;
    if (c.scenario == "manufacturer-clone") {
        auto clone = puf::manufacturer_clone(variant, c.n_bits, manufacturer_seed(c));
        auto link = transport::open_session(session_id++);
        const auto expected = variant == puf::Variant::simple ? puf::Verdict::accept : puf::Verdict::reject;
        record("manufacturer-clone", 0, puf::challenge(lock, clone, link, options), expected);
    } else if (c.scenario == "snapshot-clone") {
        snapshot = attack::clone_snapshot(key, lock, options);
        ok = ok && !snapshot->breached;
        for (const auto& [name, value] : snapshot->details) out << "snapshot " << name << ' ' << value << '\n';
    }

    try {
        puf::check_invariants(key);
        puf::check_invariants(lock);
    } catch (const std::logic_error& e) {
        out << "invariant violated: " << e.what() << '\n';
        ok = false;
    }

    write_config_record(c);
    fs::create_directories(c.out);
    puf::write_state_file((fs::path(c.out) / "key.json").string(), key);
    puf::write_state_file((fs::path(c.out) / "lock.json").string(), lock);
    {
        auto f = open_output(output_path(c, "sessions"));
        if (csv(c)) {
            f << "event,index,verdict,expected,reason,renewed,public_bits,authentication_bits\n";
            for (const auto& e : events) {
                f << e.event << ',' << e.index << ',' << e.verdict << ',' << e.expected << ',' << e.reason << ','
                  << e.renewed << ',' << e.public_bits << ',' << e.authentication_bits << '\n';
            }
        } else {
            for (const auto& e : events) {
                Json j;
                j["record"] = "session";
                j["schema_version"] = 1;
                j["event"] = e.event;
                j["index"] = e.index;
                j["verdict"] = e.verdict;
                j["expected"] = e.expected;
                j["reason"] = e.reason;
                j["renewed"] = e.renewed;
                j["public_bits"] = e.public_bits;
                j["authentication_bits"] = e.authentication_bits;
                f << j.dump() << '\n';
            }
        }
        if (snapshot && !csv(c)) attack::write_reports_json(f, std::span(&*snapshot, 1));
    }
    out << "final key_generation " << key.stored.generation << " lock_generation " << lock.stored.generation
        << '\n';
    return ok ? kExitOk : kExitBoundFailed;
}

int cmd_attack(const ExperimentConfig& c, std::ostream& out) {
    std::vector<attack::AttackReport> reports;
    if (c.attack == "brute-force" || c.attack == "brute-force-stream") {
        auto options = protocol_options(c);
        options.lockout_after.reset();
        const auto pair = ready_pair(c, options);
        attack::BruteForceConfig bf;
        bf.guess = c.attack == "brute-force" ? attack::GuessKind::key : attack::GuessKind::stream;
        bf.trials = c.trials;
        bf.seed = derive_seed(c.seed, 0, "cli/brute-force");
        bf.jobs = c.jobs;
        bf.options = options;
        reports.push_back(attack::brute_force(pair.lock, bf));
    } else if (c.attack == "passive-eve") {
        attack::PassiveEveConfig pe;
        pe.params = kljn_params(c);
        pe.mixed_cycles = c.trials;
        pe.bits_per_exchange = c.bits_per_exchange;
        pe.seed = c.seed;
        pe.jobs = c.jobs;
        reports = attack::run_passive_eve(pe);
    } else if (c.attack == "active-eve") {
        attack::ActiveEveConfig ae;
        ae.params = kljn_params(c);
        ae.injection = injection(c);
        ae.runs = c.trials;
        ae.bits_per_exchange = c.bits_per_exchange;
        ae.seed = c.seed;
        ae.jobs = c.jobs;
        reports.push_back(attack::active_eve_inject(ae));
    } else if (c.attack == "clone-snapshot") {
        auto options = protocol_options(c);
        options.lockout_after.reset();
        const auto pair = ready_pair(c, options);
        reports.push_back(attack::clone_snapshot(pair.key, pair.lock, options));
    } else {
        throw ConfigError("unknown attack: " + c.attack);
    }

    write_config_record(c);
    {
        auto f = open_output(output_path(c, "attack"));
        if (csv(c)) {
            attack::write_reports_csv(f, reports);
        } else {
            attack::write_reports_json(f, reports);
        }
    }
    attack::write_reports_csv(out, reports);
    bool breached = false;
    for (const auto& r : reports) breached = breached || r.breached;
    if (breached) out << "bound breached\n";
    return breached ? kExitBoundFailed : kExitOk;
}

int run_command(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    try {
        validate(config);
        if (config.subcommand == "exchange") return cmd_exchange(config, out);
        if (config.subcommand == "verify") return cmd_verify(config, out);
        if (config.subcommand == "puf") return cmd_puf(config, out);
        return cmd_attack(config, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitBoundFailed;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    ExperimentConfig config;
    try {
        if (!parse_args(argc, argv, config, out)) return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return run_command(config, out, err);
}

}  // namespace noisepuf::cli
