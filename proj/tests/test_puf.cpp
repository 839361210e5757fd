#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "noisepuf/cipher.hpp"
#include "noisepuf/errors.hpp"
#include "noisepuf/puf.hpp"
#include "noisepuf/stats.hpp"

using namespace noisepuf;
using namespace noisepuf::puf;

namespace {

ProtocolOptions fast_options() {
    ProtocolOptions o;
    o.kljn.noise.samples_per_cycle = 200;
    o.m = 40;
    return o;
}

DevicePair active_pair(Variant v, std::size_t n = 32, std::uint64_t seed = 1) {
    auto pair = provision(v, n, seed, seed + 1000);
    if (v != Variant::simple) {
        auto link = transport::open_session(0);
        REQUIRE(initialize(pair.key, pair.lock, link, fast_options()).verdict == Verdict::accept);
    }
    return pair;
}

Verdict run(PufDevice& lock, PufDevice& key, std::uint64_t id = 1, const ProtocolOptions& o = fast_options()) {
    auto link = transport::open_session(id);
    return challenge(lock, key, link, o).verdict;
}

// After an interrupted session: recover through the normal protocol and
// require two further accepted sessions.
bool mutually_openable(PufDevice key, PufDevice lock) {
    const auto o = fast_options();
    if (lock.phase != Phase::active) {
        auto link = transport::open_session(90);
        if (initialize(key, lock, link, o).verdict != Verdict::accept) return false;
    }
    if (run(lock, key, 91) != Verdict::accept) return false;
    if (run(lock, key, 92) != Verdict::accept) return false;
    check_invariants(key);
    check_invariants(lock);
    return key.stored.bits == lock.stored.bits;
}

}  // namespace

TEST_CASE("provisioning") {
    for (auto v : {Variant::ultra, Variant::strong, Variant::simple}) {
        const auto p = provision(v, 64, 5, 6);
        CHECK(p.key.stored == p.lock.stored);
        CHECK(p.key.bank == p.lock.bank);
        CHECK(p.key.stored.origin == Origin::manufacturer);
        CHECK(p.key.stored.generation == 0);
        CHECK(p.key.role == Role::key);
        CHECK(p.lock.role == Role::lock);
        CHECK(p.key.entropy_seed != p.lock.entropy_seed);
        CHECK(p.key.phase == (v == Variant::simple ? Phase::active : Phase::provisioned));
        check_invariants(p.key);
        check_invariants(p.lock);
    }
    // Physical entropy differs from what the manufacturer can reproduce.
    CHECK(provision(Variant::strong, 64, 5, 6).key.entropy_seed != manufacturer_clone(Variant::strong, 64, 5).entropy_seed);
    CHECK(manufacturer_clone(Variant::strong, 64, 5).stored == provision(Variant::strong, 64, 5, 6).key.stored);
    CHECK_THROWS_AS(provision(Variant::ultra, 0, 1, 2), std::invalid_argument);
}

TEST_CASE("string conversions round trip") {
    for (auto v : {Variant::ultra, Variant::strong, Variant::simple}) CHECK(parse_variant(to_string(v)) == v);
    for (auto p : {Phase::provisioned, Phase::initialized, Phase::active}) CHECK(parse_phase(to_string(p)) == p);
    for (auto o : {Origin::manufacturer, Origin::kljn_exchanged}) CHECK(parse_origin(to_string(o)) == o);
    for (auto r : {Role::key, Role::lock}) CHECK(parse_role(to_string(r)) == r);
    CHECK_THROWS(parse_variant("weak"));
}

TEST_CASE("ultra lifecycle renews the key on every use") {
    auto pair = provision(Variant::ultra, 32, 2, 3);
    auto link = transport::open_session(0);
    const auto init = initialize(pair.key, pair.lock, link, fast_options());
    CHECK(init.verdict == Verdict::accept);
    CHECK(init.renewed);
    CHECK(pair.key.stored.generation == 1);
    CHECK(pair.key.stored.origin == Origin::kljn_exchanged);
    CHECK(pair.key.stored.bits != provision(Variant::ultra, 32, 2, 3).key.stored.bits);

    std::set<std::string> keys{pair.key.stored.bits.to_hex()};
    for (std::uint64_t g = 2; g <= 4; ++g) {
        auto l = transport::open_session(g);
        const auto s = challenge(pair.lock, pair.key, l, fast_options());
        CHECK(s.verdict == Verdict::accept);
        CHECK(s.renewed);
        CHECK(s.secure_bits_consumed == 32);
        CHECK(pair.key.stored.generation == g);
        CHECK(pair.lock.stored == pair.key.stored);
        keys.insert(pair.key.stored.bits.to_hex());
    }
    CHECK(keys.size() == 4);
}

TEST_CASE("renewal reports the authentication budget of its comparison traffic") {
    auto pair = provision(Variant::ultra, 16, 4, 5);
    auto link = transport::open_session(0);
    const auto s = initialize(pair.key, pair.lock, link, fast_options());
    REQUIRE(s.exchange);
    std::uint64_t f = 0;
    for (const auto& c : s.exchange->cycles) {
        f += 64 * (c.alice_probe.u.size() + c.alice_probe.i.size() + c.bob_probe.u.size() + c.bob_probe.i.size());
    }
    CHECK(s.public_bits == f);
    CHECK(s.exchange->public_bits == f);
    unsigned k = 0;
    while ((std::uint64_t{1} << k) < f) ++k;
    CHECK(s.authentication_bits == k);
}

TEST_CASE("raw ultra response sends the stored key itself") {
    auto pair = active_pair(Variant::ultra, 16);
    auto o = fast_options();
    o.raw_ultra_response = true;
    auto link = transport::open_session(5);
    const auto nonce = lock_send_ultra_challenge(pair.lock, link.lock);
    CHECK(key_answer_ultra(pair.key, link.key, o));
    const auto frame = link.lock.try_recv();
    REQUIRE(frame);
    CHECK(BitString::from_packed(frame->payload, 16) == pair.key.stored.bits);
    CHECK(nonce != 0);
    CHECK(run(pair.lock, pair.key, 6, o) == Verdict::accept);
}

TEST_CASE("strong: manufacturer knowledge is useless after initialization") {
    auto pair = active_pair(Variant::strong);
    auto clone = manufacturer_clone(Variant::strong, 32, 1);
    CHECK(run(pair.lock, clone) == Verdict::reject);
    CHECK(run(pair.lock, pair.key, 2) == Verdict::accept);
    // Before initialization the manufacturer can stand in for the key.
    auto fresh = provision(Variant::strong, 32, 1, 1001);
    auto link = transport::open_session(0);
    CHECK(initialize(clone, fresh.lock, link, fast_options()).verdict == Verdict::accept);
}

TEST_CASE("simple: a manufacturer clone is accepted") {
    auto pair = active_pair(Variant::simple);
    auto clone = manufacturer_clone(Variant::simple, 32, 1);
    CHECK(run(pair.lock, clone) == Verdict::accept);
    CHECK(run(pair.lock, pair.key, 2) == Verdict::accept);
    CHECK(pair.key.stored.generation == 0);
}

TEST_CASE("counterfeits are rejected and lockout engages") {
    for (auto v : {Variant::ultra, Variant::strong, Variant::simple}) {
        auto pair = active_pair(v);
        auto o = fast_options();
        o.lockout_after = 3;
        for (int k = 0; k < 3; ++k) {
            auto fake = counterfeit_key(pair.lock, BitString::random(32, 500 + k), 7);
            CHECK(run(pair.lock, fake, 10 + k, o) == Verdict::reject);
        }
        CHECK(pair.lock.failed_attempts == 3);
        auto link = transport::open_session(20);
        const auto s = challenge(pair.lock, pair.key, link, o);
        CHECK(s.verdict == Verdict::aborted);
        CHECK(s.reason == "locked out");
        reset_lockout(pair.lock);
        CHECK(run(pair.lock, pair.key, 21, o) == Verdict::accept);
        CHECK(pair.lock.failed_attempts == 0);
        CHECK_THROWS_AS(counterfeit_key(pair.lock, BitString(5), 1), std::invalid_argument);
    }
}

TEST_CASE("protocol preconditions") {
    auto simple = provision(Variant::simple, 16, 1, 2);
    auto link = transport::open_session();
    CHECK_THROWS_AS(initialize(simple.key, simple.lock, link, fast_options()), std::invalid_argument);
    auto ultra = provision(Variant::ultra, 16, 1, 2);
    CHECK_THROWS_AS(challenge(ultra.lock, ultra.key, link, fast_options()), std::invalid_argument);
    CHECK_THROWS_AS(initialize(ultra.lock, ultra.key, link, fast_options()), std::invalid_argument);
    auto strong = active_pair(Variant::strong, 16);
    CHECK_THROWS_AS(challenge_ultra(strong.lock, strong.key, link, fast_options()), std::invalid_argument);
    CHECK_THROWS_AS(initialize(strong.key, strong.lock, link, fast_options()), std::invalid_argument);
    CHECK_THROWS_AS(challenge_simple(strong.lock, strong.key, link, fast_options()), std::invalid_argument);

    auto bad = simple.key;
    bad.pending = bad.stored;
    CHECK_THROWS_AS(check_invariants(bad), std::logic_error);
    auto bad2 = ultra.key;
    bad2.phase = Phase::active;
    CHECK_THROWS_AS(check_invariants(bad2), std::logic_error);
}

TEST_CASE("cipher primitives") {
    const auto k = BitString::random(48, 1);
    const auto p = BitString::random(48, 2);
    CHECK(apply_cipher(apply_cipher(p, k, 9), k, 9) == p);
    CHECK(apply_cipher(p, k, 9) != apply_cipher(p, k, 10));
    CHECK(one_time_response(k, 1) != one_time_response(k, 2));
    CHECK(one_time_response(k, 1) != k);

    // Bijectivity by enumeration at N = 8 and N = 1.
    for (std::uint64_t tweak : {0ULL, 5ULL, 77ULL}) {
        std::set<std::string> images;
        std::set<std::string> masked;
        for (unsigned x = 0; x < 256; ++x) {
            BitString in(8);
            for (unsigned b = 0; b < 8; ++b) in.set(b, ((x >> (7 - b)) & 1u) != 0);
            images.insert(keyed_permutation(in, tweak, "test").to_hex());
            masked.insert((in ^ cipher_stream(in, tweak)).to_hex());
        }
        CHECK(images.size() == 256);
        CHECK(masked.size() == 256);
        CHECK(keyed_permutation(BitString(1), tweak, "t") != keyed_permutation(BitString::from_binary("1"), tweak, "t"));
    }
}

TEST_CASE("device state round trip and integrity") {
    auto pair = active_pair(Variant::ultra, 24);
    pair.lock.pending = SecretKey{BitString::random(24, 3), Origin::kljn_exchanged, 9};
    for (const auto* d : {&pair.key, &pair.lock}) {
        const auto rec = save_state(*d);
        CHECK(load_state(rec) == *d);
        CHECK(rec.find("\"version\"") != std::string::npos);
        for (std::size_t pos : {rec.size() / 3, rec.size() / 2}) {
            auto corrupt = rec;
            corrupt[pos] = corrupt[pos] == '1' ? '2' : '1';
            CHECK_THROWS_AS(load_state(corrupt), IntegrityError);
        }
        CHECK_THROWS_AS(load_state(rec.substr(0, rec.size() / 2)), IntegrityError);
        CHECK_THROWS_AS(load_state(""), IntegrityError);
    }
    const auto dir = std::filesystem::temp_directory_path() / "noisepuf_state_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "lock.json").string();
    write_state_file(path, pair.lock);
    CHECK(read_state_file(path) == pair.lock);
    write_state_file(path, pair.key);
    CHECK(read_state_file(path) == pair.key);
    CHECK_THROWS(read_state_file((dir / "missing.json").string()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("strong challenge messages against replaced participants") {
    auto pair = active_pair(Variant::strong, 16);
    auto link = transport::open_session(3);
    const auto c = lock_send_strong_challenge(pair.lock, pair.lock.stored, link.lock, 20);
    CHECK_FALSE(lock_check_stream_response(pair.lock, pair.lock.stored, c, link.lock));
    CHECK(key_answer_strong(pair.key, link.key, fast_options()));
    CHECK_FALSE(key_answer_strong(pair.key, link.key, fast_options()));
    const auto r = lock_check_stream_response(pair.lock, pair.lock.stored, c, link.lock);
    REQUIRE(r);
    CHECK(r->accepted);
    CHECK(r->steps_checked == 20);

    // A response with the wrong length is a plain reject.
    const auto c2 = lock_send_strong_challenge(pair.lock, pair.lock.stored, link.lock, 20);
    (void)link.key.try_recv();
    link.key.send(transport::FrameType::stream_response,
                  nbl::encode_wire(nbl::RtwStream{nbl::StreamMode::product, c2.start, {1, 1, 1}}));
    const auto r2 = lock_check_stream_response(pair.lock, pair.lock.stored, c2, link.lock);
    REQUIRE(r2);
    CHECK_FALSE(r2->accepted);
}

TEST_CASE("renewal atomicity: every fault position leaves the pair openable") {
    struct Scenario {
        const char* name;
        Variant variant;
        bool init;
    };
    for (const auto& sc : {Scenario{"ultra init", Variant::ultra, true}, Scenario{"ultra use", Variant::ultra, false},
                           Scenario{"strong init", Variant::strong, true}}) {
        CAPTURE(sc.name);
        const auto base = sc.init ? provision(sc.variant, 16, 8, 9) : active_pair(sc.variant, 16, 8);
        // Frame counts of an undisturbed session bound the sweep.
        auto probe = base;
        auto probe_link = transport::open_session(1);
        if (sc.init) {
            REQUIRE(initialize(probe.key, probe.lock, probe_link, fast_options()).verdict == Verdict::accept);
        } else {
            REQUIRE(challenge(probe.lock, probe.key, probe_link, fast_options()).verdict == Verdict::accept);
        }
        const std::uint64_t frames[2] = {probe_link.key.frames_sent(), probe_link.lock.frames_sent()};
        CHECK(frames[0] >= 3);
        CHECK(frames[1] >= 3);

        int cases = 0;
        for (auto side : {transport::Side::key, transport::Side::lock}) {
            for (auto kind : {transport::FaultKind::drop_rest, transport::FaultKind::truncate}) {
                for (std::uint64_t at = 0; at <= frames[static_cast<int>(side)]; ++at) {
                    CAPTURE(static_cast<int>(side));
                    CAPTURE(static_cast<int>(kind));
                    CAPTURE(at);
                    auto pair = base;
                    auto link = transport::open_session(1);
                    (side == transport::Side::key ? link.key : link.lock).inject_fault(at, kind);
                    if (sc.init) {
                        (void)initialize(pair.key, pair.lock, link, fast_options());
                    } else {
                        (void)challenge(pair.lock, pair.key, link, fast_options());
                    }
                    CHECK(mutually_openable(pair.key, pair.lock));
                    ++cases;
                }
            }
        }
        CHECK(cases >= 12);
    }
}
