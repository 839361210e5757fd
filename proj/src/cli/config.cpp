#include "noisepuf/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "CLI11.hpp"
#include "json.hpp"

namespace noisepuf::cli {

namespace {

using Json = nlohmann::ordered_json;

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
    const auto bad = [&] { return ConfigError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'"); };
    if constexpr (std::is_same_v<T, std::string>) {
        return std::string(text);
    } else if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw bad();
    } else {
        T value{};
        const char* first = text.data();
        const char* last = text.data() + text.size();
        std::from_chars_result r{};
        if constexpr (std::is_integral_v<T>) {
            if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
                r = std::from_chars(first + 2, last, value, 16);
            } else {
                r = std::from_chars(first, last, value);
            }
        } else {
            r = std::from_chars(first, last, value);
        }
        if (text.empty() || r.ec != std::errc() || r.ptr != last) throw bad();
        return value;
    }
}

template <typename T>
T json_value(std::string_view key, const Json& j) {
    const auto bad = [&] { return ConfigError("wrong type for " + std::string(key) + ": " + j.dump()); };
    if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw bad();
    } else if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw bad();
    } else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_unsigned()) throw bad();
        if (j.get<std::uint64_t>() > std::numeric_limits<T>::max()) throw bad();
    } else {
        if (!j.is_number()) throw bad();
    }
    return j.get<T>();
}

struct Field {
    std::string name;
    std::string help;
    std::function<Json(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const Json&)> set_json;
    std::function<void(ExperimentConfig&, std::string_view)> set_text;
};

template <typename T>
Field field(std::string name, T ExperimentConfig::*member, std::string help) {
    Field f;
    f.name = name;
    f.help = std::move(help);
    f.get = [member](const ExperimentConfig& c) { return Json(c.*member); };
    f.set_json = [member, name](ExperimentConfig& c, const Json& j) { c.*member = json_value<T>(name, j); };
    f.set_text = [member, name](ExperimentConfig& c, std::string_view t) { c.*member = parse_value<T>(name, t); };
    return f;
}

const std::vector<Field>& fields() {
    using C = ExperimentConfig;
    static const std::vector<Field> table = {
        field("subcommand", &C::subcommand, "exchange | verify | puf | attack"),
        field("seed", &C::seed, "master seed"),
        field("variant", &C::variant, "ultra | strong | simple"),
        field("n_bits", &C::n_bits, "key length N"),
        field("m", &C::m, "RTW steps per verification (upper end of the verify sweep)"),
        field("m_min", &C::m_min, "lower end of the verify sweep"),
        field("trials", &C::trials, "trials per point (verify), attack trials, runs or mixed cycles"),
        field("format", &C::format, "structured-text | csv"),
        field("out", &C::out, "output directory"),
        field("jobs", &C::jobs, "worker threads"),
        field("r_low", &C::r_low, "R_L in ohms"),
        field("r_high", &C::r_high, "R_H in ohms"),
        field("kt_eff", &C::kt_eff, "effective kT"),
        field("bandwidth", &C::bandwidth, "noise bandwidth"),
        field("samples_per_cycle", &C::samples_per_cycle, "noise samples per bit cycle"),
        field("epsilon_compare", &C::epsilon_compare, "comparison tolerance, in mixed-state RMS units"),
        field("compare_subsample", &C::compare_subsample, "compare every k-th sample"),
        field("abort_alarm_fraction", &C::abort_alarm_fraction, "abort when alarms exceed this fraction of cycles"),
        field("bob_temperature_ratio", &C::bob_temperature_ratio, "Bob/Alice noise temperature (1 is ideal)"),
        field("stream_mode", &C::stream_mode, "product | xor"),
        field("verify_mode", &C::verify_mode, "random | identical"),
        field("sessions", &C::sessions, "challenge sessions after initialization"),
        field("scenario", &C::scenario, "none | manufacturer-clone | snapshot-clone"),
        field("lockout_after", &C::lockout_after, "lock refuses sessions after this many failures (0 = off)"),
        field("raw_ultra_response", &C::raw_ultra_response, "send the ultra key unmasked"),
        field("attack", &C::attack, "brute-force | brute-force-stream | passive-eve | active-eve | clone-snapshot"),
        field("bits_per_exchange", &C::bits_per_exchange, "key bits per exchange in attack runs"),
        field("injection_kind", &C::injection_kind, "shunt | series"),
        field("injection_amplitude", &C::injection_amplitude, "injection amplitude, in mixed-state RMS units"),
        field("injection_start", &C::injection_start, "first injected cycle"),
        field("injection_duration", &C::injection_duration, "injected cycles"),
    };
    return table;
}

std::string normalize_key(std::string_view key) {
    std::string k(key);
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

const Field& find_field(std::string_view key) {
    const std::string k = normalize_key(key);
    for (const auto& f : fields()) {
        if (f.name == k) return f;
    }
    throw ConfigError("unknown config key: " + std::string(key));
}

std::string flag_name(const std::string& key) {
    std::string k = key;
    std::replace(k.begin(), k.end(), '_', '-');
    return "--" + k;
}

template <typename... Allowed>
void require_one_of(std::string_view key, const std::string& value, Allowed... allowed) {
    if (((value != allowed) && ...)) throw ConfigError("invalid " + std::string(key) + ": '" + value + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.name);
    return keys;
}

void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value) {
    find_field(key).set_text(config, value);
}

void apply_assignment(ExperimentConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    }
    apply_override(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string to_json(const ExperimentConfig& config) {
    Json j;
    j["schema_version"] = 1;
    for (const auto& f : fields()) j[f.name] = f.get(config);
    return j.dump(2) + "\n";
}

ExperimentConfig merge_json(ExperimentConfig base, std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "schema_version") {
            if (value != 1) throw ConfigError("unsupported config schema_version " + value.dump());
            continue;
        }
        find_field(key).set_json(base, value);
    }
    return base;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return merge_json(std::move(base), text.str());
}

void validate(const ExperimentConfig& c) {
    require_one_of("subcommand", c.subcommand, "exchange", "verify", "puf", "attack");
    require_one_of("format", c.format, "structured-text", "csv");
    require_one_of("stream_mode", c.stream_mode, "product", "xor");
    require_one_of("verify_mode", c.verify_mode, "random", "identical");
    require_one_of("scenario", c.scenario, "none", "manufacturer-clone", "snapshot-clone");
    require_one_of("injection_kind", c.injection_kind, "shunt", "series");
    try {
        (void)puf::parse_variant(c.variant);
    } catch (const std::exception&) {
        throw ConfigError("invalid variant: '" + c.variant + "'");
    }
    if (c.subcommand == "attack") {
        if (c.attack.empty()) throw ConfigError("attack: no attack name given");
        require_one_of("attack", c.attack, "brute-force", "brute-force-stream", "passive-eve", "active-eve",
                       "clone-snapshot");
    }
    if (c.n_bits < 1) throw ConfigError("n_bits must be >= 1");
    if (c.m < 1) throw ConfigError("m must be >= 1");
    if (c.m_min < 1 || c.m_min > c.m) throw ConfigError("m_min must lie in [1, m]");
    if (c.trials < 1) throw ConfigError("trials must be >= 1");
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
    if (c.bits_per_exchange < 1) throw ConfigError("bits_per_exchange must be >= 1");
    if (c.injection_duration < 1) throw ConfigError("injection_duration must be >= 1");
    if (!(c.injection_amplitude >= 0.0)) throw ConfigError("injection_amplitude must be >= 0");
    try {
        kljn_params(c).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

kljn::KljnParams kljn_params(const ExperimentConfig& c) {
    kljn::KljnParams p;
    p.r_low = c.r_low;
    p.r_high = c.r_high;
    p.noise.kt_eff = c.kt_eff;
    p.noise.bandwidth = c.bandwidth;
    p.noise.samples_per_cycle = c.samples_per_cycle;
    p.epsilon_compare = c.epsilon_compare;
    p.compare_subsample = c.compare_subsample;
    p.abort_alarm_fraction = c.abort_alarm_fraction;
    p.bob_temperature_ratio = c.bob_temperature_ratio;
    return p;
}

puf::ProtocolOptions protocol_options(const ExperimentConfig& c) {
    puf::ProtocolOptions o;
    o.kljn = kljn_params(c);
    o.m = c.m;
    o.raw_ultra_response = c.raw_ultra_response;
    if (c.lockout_after > 0) o.lockout_after = c.lockout_after;
    return o;
}

kljn::Injection injection(const ExperimentConfig& c) {
    kljn::Injection inj;
    inj.kind = c.injection_kind == "series" ? kljn::InjectionKind::series_voltage : kljn::InjectionKind::shunt_current;
    inj.amplitude_scale = c.injection_amplitude;
    inj.start_cycle = c.injection_start;
    inj.duration = c.injection_duration;
    return inj;
}

bool parse_args(int argc, const char* const* argv, ExperimentConfig& config, std::ostream& out) {
    CLI::App app{"Noise-based key exchange and PUF protocol experiments", "noisepuf-cli"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::vector<std::string> assignments;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", assignments, "key=value override, applied last")->take_all();

    std::map<std::string, std::string> flag_values;
    for (const auto& f : fields()) {
        if (f.name == "subcommand") continue;
        app.add_option(flag_name(f.name), flag_values[f.name], f.help);
    }

    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"exchange", "verify", "puf", "attack"}) {
        subs[name] = app.add_subcommand(name)->fallthrough();
    }
    subs["exchange"]->description("run one KLJN key exchange and write its transcript");
    subs["verify"]->description("false-accept sweep of RTW string verification");
    subs["puf"]->description("provision, initialize and challenge a key/lock pair");
    subs["attack"]->description("run an attacker model; nonzero exit when a bound is breached");
    std::string attack_name;
    subs["attack"]->add_option("name", attack_name, "attack to run");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return false;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return false;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    ExperimentConfig result;
    if (!config_path.empty()) result = load_config_file(config_path, result);
    for (const auto& f : fields()) {
        if (f.name == "subcommand") continue;
        if (app.count(flag_name(f.name)) > 0) f.set_text(result, flag_values[f.name]);
    }
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) result.subcommand = name;
    }
    if (!attack_name.empty()) result.attack = attack_name;
    for (const auto& a : assignments) apply_assignment(result, a);
    config = std::move(result);
    return true;
}

}  // namespace noisepuf::cli
