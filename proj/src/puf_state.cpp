#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "noisepuf/errors.hpp"
#include "noisepuf/puf.hpp"
#include "noisepuf/seed.hpp"

namespace noisepuf::puf {

namespace {

constexpr int kStateVersion = 1;
constexpr std::string_view kStateFormat = "noisepuf-device";

using json = nlohmann::ordered_json;

std::string checksum_hex(const std::string& body) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
    return buf;
}

json key_json(const SecretKey& k) {
    return json{{"bits_hex", k.bits.to_hex()}, {"origin", to_string(k.origin)}, {"generation", k.generation}};
}

SecretKey key_from_json(const json& j, std::size_t n) {
    return SecretKey{BitString::from_hex(j.at("bits_hex").get<std::string>(), n),
                     parse_origin(j.at("origin").get<std::string>()), j.at("generation").get<std::uint64_t>()};
}

json body_json(const PufDevice& d) {
    json j;
    j["format"] = kStateFormat;
    j["version"] = kStateVersion;
    j["variant"] = to_string(d.variant);
    j["role"] = to_string(d.role);
    j["phase"] = to_string(d.phase);
    j["n_bits"] = d.n_bits();
    j["key_bits_hex"] = d.stored.bits.to_hex();
    j["origin"] = to_string(d.stored.origin);
    j["generation"] = d.stored.generation;
    j["pending"] = d.pending ? key_json(*d.pending) : json(nullptr);
    j["session_counter"] = d.session_counter;
    j["failed_attempts"] = d.failed_attempts;
    j["entropy_seed"] = d.entropy_seed;
    json seeds = json::array();
    for (const auto& pair : d.bank.seeds()) seeds.push_back(json::array({pair[0], pair[1]}));
    j["bank_seeds"] = std::move(seeds);
    return j;
}

}  // namespace

std::string save_state(const PufDevice& device) {
    check_invariants(device);
    json j = body_json(device);
    j["checksum"] = checksum_hex(j.dump());
    return j.dump(2) + "\n";
}

PufDevice load_state(std::string_view record) {
    json j;
    try {
        j = json::parse(record);
    } catch (const json::parse_error& e) {
        throw IntegrityError(std::string("device state: unparsable record: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("checksum")) throw IntegrityError("device state: missing checksum");
        const auto stored_sum = j.at("checksum").get<std::string>();
        j.erase("checksum");
        if (checksum_hex(j.dump()) != stored_sum) throw IntegrityError("device state: checksum mismatch");
        if (j.at("format").get<std::string>() != kStateFormat) throw IntegrityError("device state: wrong format tag");
        if (j.at("version").get<int>() != kStateVersion) throw IntegrityError("device state: unsupported version");

        PufDevice d;
        const auto n = j.at("n_bits").get<std::size_t>();
        d.variant = parse_variant(j.at("variant").get<std::string>());
        d.role = parse_role(j.at("role").get<std::string>());
        d.phase = parse_phase(j.at("phase").get<std::string>());
        d.stored = SecretKey{BitString::from_hex(j.at("key_bits_hex").get<std::string>(), n),
                             parse_origin(j.at("origin").get<std::string>()), j.at("generation").get<std::uint64_t>()};
        if (!j.at("pending").is_null()) d.pending = key_from_json(j.at("pending"), n);
        d.session_counter = j.at("session_counter").get<std::uint64_t>();
        d.failed_attempts = j.at("failed_attempts").get<std::uint32_t>();
        d.entropy_seed = j.at("entropy_seed").get<std::uint64_t>();
        std::vector<std::array<std::uint64_t, 2>> seeds;
        for (const auto& pair : j.at("bank_seeds")) {
            seeds.push_back({pair.at(0).get<std::uint64_t>(), pair.at(1).get<std::uint64_t>()});
        }
        d.bank = nbl::GeneratorBank(std::move(seeds));
        check_invariants(d);
        return d;
    } catch (const IntegrityError&) {
        throw;
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("device state: invalid record: ") + e.what());
    }
}

void write_state_file(const std::string& path, const PufDevice& device) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << save_state(device);
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

PufDevice read_state_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_state(buf.str());
}

}  // namespace noisepuf::puf
