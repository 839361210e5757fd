#include <ostream>

#include "json.hpp"

#include "noisepuf/kljn.hpp"

namespace noisepuf::kljn {

namespace {

constexpr int kTranscriptSchema = 1;

nlohmann::ordered_json params_json(const KljnParams& p) {
    const auto t = p.resolved_thresholds();
    nlohmann::ordered_json j;
    j["r_low"] = p.r_low;
    j["r_high"] = p.r_high;
    j["kt_eff"] = p.noise.kt_eff;
    j["bandwidth"] = p.noise.bandwidth;
    j["samples_per_cycle"] = p.noise.samples_per_cycle;
    j["threshold_low"] = t.lower;
    j["threshold_high"] = t.upper;
    j["epsilon_compare"] = p.epsilon_compare;
    j["compare_subsample"] = p.compare_subsample;
    j["abort_alarm_fraction"] = p.abort_alarm_fraction;
    j["bob_temperature_ratio"] = p.bob_temperature_ratio;
    return j;
}

}  // namespace

void write_transcript(std::ostream& out, const ExchangeTranscript& tx) {
    nlohmann::ordered_json header;
    header["record"] = "header";
    header["schema_version"] = kTranscriptSchema;
    header["n_bits"] = tx.n_bits;
    header["params"] = params_json(tx.params);
    header["seeds"] = {{"alice_switch", tx.seeds.alice_switch},
                       {"bob_switch", tx.seeds.bob_switch},
                       {"alice_noise", tx.seeds.alice_noise},
                       {"bob_noise", tx.seeds.bob_noise}};
    out << header.dump() << '\n';

    for (const auto& c : tx.cycles) {
        nlohmann::ordered_json rec;
        rec["record"] = "cycle";
        rec["index"] = c.index;
        rec["class"] = to_string(c.classification);
        rec["kept"] = c.kept;
        rec["alarm"] = c.alarm;
        rec["msq_u"] = c.msq_u;
        rec["msq_i"] = c.msq_i;
        out << rec.dump() << '\n';
    }

    nlohmann::ordered_json summary;
    summary["record"] = "summary";
    summary["cycles"] = tx.cycles.size();
    summary["kept"] = tx.kept_count;
    summary["discarded"] = tx.discarded_count;
    summary["alarms"] = tx.alarm_count;
    summary["estimation_errors"] = tx.estimation_errors;
    summary["public_bits"] = tx.public_bits;
    summary["authentication_bits"] = tx.authentication_bits_consumed;
    summary["key_alice"] = tx.key_alice.to_hex();
    summary["key_bob"] = tx.key_bob.to_hex();
    out << summary.dump() << '\n';
}

}  // namespace noisepuf::kljn
