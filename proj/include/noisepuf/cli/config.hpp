#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "noisepuf/kljn.hpp"
#include "noisepuf/puf.hpp"

namespace noisepuf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBoundFailed = 1;
inline constexpr int kExitUsage = 2;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One experiment, fully determined by these fields. Every field has a flag
/// of the same name (underscores become dashes) and a --set key.
struct ExperimentConfig {
    std::string subcommand;
    std::uint64_t seed = 1;
    std::string variant = "ultra";
    std::size_t n_bits = 256;
    std::size_t m = 83;
    /// verify sweeps m_min .. m.
    std::size_t m_min = 1;
    std::uint64_t trials = 1000;
    std::string format = "structured-text";
    std::string out = ".";
    unsigned jobs = 1;

    double r_low = 10e3;
    double r_high = 100e3;
    double kt_eff = 1.0;
    double bandwidth = 0.5;
    std::size_t samples_per_cycle = 1000;
    double epsilon_compare = 0.01;
    std::size_t compare_subsample = 10;
    double abort_alarm_fraction = 0.25;
    double bob_temperature_ratio = 1.0;

    std::string stream_mode = "product";
    std::string verify_mode = "random";

    std::size_t sessions = 3;
    std::string scenario = "none";
    /// 0 disables the lockout.
    std::uint32_t lockout_after = 5;
    bool raw_ultra_response = false;

    std::string attack;
    std::size_t bits_per_exchange = 64;
    std::string injection_kind = "shunt";
    double injection_amplitude = 10.0;
    std::size_t injection_start = 2;
    std::size_t injection_duration = 1;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Field names in declaration order.
std::vector<std::string> config_keys();
/// Parses `value` as the type of field `key`. Throws ConfigError on an
/// unknown key or a malformed value.
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Parses "key=value".
void apply_assignment(ExperimentConfig& config, std::string_view assignment);

/// JSON object with every field plus schema_version.
std::string to_json(const ExperimentConfig& config);
/// Unspecified fields keep the values already in `base`.
ExperimentConfig merge_json(ExperimentConfig base, std::string_view text);
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

/// Throws ConfigError when the config cannot run.
void validate(const ExperimentConfig& config);

kljn::KljnParams kljn_params(const ExperimentConfig& config);
puf::ProtocolOptions protocol_options(const ExperimentConfig& config);
kljn::Injection injection(const ExperimentConfig& config);

/// Defaults < --config file < per-field flags < --set, in that order.
/// Throws ConfigError on bad usage; returns false when help was printed.
bool parse_args(int argc, const char* const* argv, ExperimentConfig& config, std::ostream& out);

}  // namespace noisepuf::cli
