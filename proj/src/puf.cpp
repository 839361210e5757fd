#include "noisepuf/puf.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "noisepuf/cipher.hpp"
#include "noisepuf/errors.hpp"
#include "noisepuf/seed.hpp"

namespace noisepuf::puf {

using transport::Endpoint;
using transport::Frame;
using transport::FrameType;
using transport::Link;

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::ultra: return "ultra";
        case Variant::strong: return "strong";
        case Variant::simple: return "simple";
    }
    return "?";
}

std::string_view to_string(Role r) noexcept { return r == Role::key ? "key" : "lock"; }

std::string_view to_string(Phase p) noexcept {
    switch (p) {
        case Phase::provisioned: return "provisioned";
        case Phase::initialized: return "initialized";
        case Phase::active: return "active";
    }
    return "?";
}

std::string_view to_string(Origin o) noexcept { return o == Origin::manufacturer ? "manufacturer" : "kljn-exchanged"; }

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::accept: return "accept";
        case Verdict::reject: return "reject";
        case Verdict::aborted: return "aborted";
    }
    return "?";
}

Variant parse_variant(std::string_view text) {
    if (text == "ultra") return Variant::ultra;
    if (text == "strong") return Variant::strong;
    if (text == "simple") return Variant::simple;
    throw std::invalid_argument("unknown variant: " + std::string(text));
}

Role parse_role(std::string_view text) {
    if (text == "key") return Role::key;
    if (text == "lock") return Role::lock;
    throw std::invalid_argument("unknown role: " + std::string(text));
}

Phase parse_phase(std::string_view text) {
    if (text == "provisioned") return Phase::provisioned;
    if (text == "initialized") return Phase::initialized;
    if (text == "active") return Phase::active;
    throw std::invalid_argument("unknown phase: " + std::string(text));
}

Origin parse_origin(std::string_view text) {
    if (text == "manufacturer") return Origin::manufacturer;
    if (text == "kljn-exchanged") return Origin::kljn_exchanged;
    throw std::invalid_argument("unknown origin: " + std::string(text));
}

void check_invariants(const PufDevice& d) {
    if (d.stored.bits.empty()) throw std::logic_error("device: empty key");
    if (d.bank.n_bits() != d.n_bits()) throw std::logic_error("device: bank size differs from key length");
    if (d.pending && d.pending->bits.size() != d.n_bits()) throw std::logic_error("device: pending key length");
    if (d.variant == Variant::ultra && d.phase == Phase::active && d.stored.origin != Origin::kljn_exchanged) {
        throw std::logic_error("device: active ultra-strong key must be KLJN-exchanged");
    }
    if (d.variant == Variant::simple && (d.stored.origin != Origin::manufacturer || d.pending)) {
        throw std::logic_error("device: simple variant holds only the manufacturer key");
    }
}

namespace {

std::vector<std::uint8_t> be_bytes(std::uint64_t v, int count) {
    std::vector<std::uint8_t> out;
    for (int shift = (count - 1) * 8; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
    return out;
}

std::uint64_t read_be(const std::vector<std::uint8_t>& bytes, std::size_t offset, int count) {
    std::uint64_t v = 0;
    for (int k = 0; k < count; ++k) v = (v << 8) | bytes[offset + static_cast<std::size_t>(k)];
    return v;
}

std::optional<Frame> recv_type(Endpoint& ep, FrameType type) {
    auto f = ep.try_recv();
    if (!f || f->type != type) return std::nullopt;
    return f;
}

std::uint64_t lock_random(const PufDevice& lock, std::string_view label) {
    return derive_seed(lock.entropy_seed, lock.session_counter, label);
}

// Comparison payload: for each cycle, the subsampled u values then i values,
// each as a big-endian IEEE double.
std::vector<std::uint8_t> encode_probes(const kljn::ExchangeTranscript& tx, bool alice_end) {
    std::vector<std::uint8_t> out;
    for (const auto& c : tx.cycles) {
        const auto& probe = alice_end ? c.alice_probe : c.bob_probe;
        for (const auto* values : {&probe.u, &probe.i}) {
            for (double v : *values) {
                const auto word = std::bit_cast<std::uint64_t>(v);
                for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(word >> shift));
            }
        }
    }
    return out;
}

// Replays the comparison against the peer's values and checks it reproduces
// the alarm flags of the exchange. False on a malformed payload.
bool check_peer_probes(const kljn::ExchangeTranscript& tx, const std::vector<std::uint8_t>& payload,
                       bool peer_is_alice) {
    std::size_t expected = 0;
    for (const auto& c : tx.cycles) expected += 16 * c.alice_probe.u.size();
    if (payload.size() != expected) return false;

    auto params = tx.params;
    params.compare_subsample = 1;
    std::size_t offset = 0;
    auto take = [&](std::size_t n) {
        std::vector<double> values(n);
        for (auto& v : values) {
            v = std::bit_cast<double>(read_be(payload, offset, 8));
            offset += 8;
        }
        return values;
    };
    for (const auto& c : tx.cycles) {
        const auto& own = peer_is_alice ? c.bob_probe : c.alice_probe;
        const auto peer_u = take(own.u.size());
        const auto peer_i = take(own.i.size());
        const auto report = kljn::compare_instantaneous(peer_u, peer_i, own.u, own.i, params);
        if (report.alarm != c.alarm) throw ProtocolError("comparison replay disagrees with the exchange");
    }
    return true;
}

struct RenewalOutcome {
    bool committed = false;
    std::string reason;
    std::shared_ptr<const kljn::ExchangeTranscript> exchange;
};

void key_rollback(PufDevice& key, Phase phase_before) {
    key.pending.reset();
    key.phase = phase_before;
}

// Lock side: before the commit is sent the pending key is simply dropped;
// afterwards the outcome is in doubt and the candidate is kept.
void lock_rollback(PufDevice& lock, Phase phase_before, bool commit_sent) {
    if (commit_sent) return;
    lock.pending.reset();
    lock.phase = phase_before;
}

// KLJN exchange followed by a two-phase commit:
//   lock -> key   renew_start
//   key  -> lock  comparison (key's end)
//   lock -> key   comparison (lock's end)      both now hold the candidate
//   lock -> key   commit                       key commits
//   key  -> lock  commit_ack                   lock commits
RenewalOutcome renew(PufDevice& key, PufDevice& lock, Link& link, const ProtocolOptions& options) {
    RenewalOutcome out;
    const Phase key_phase = key.phase;
    const Phase lock_phase = lock.phase;
    const Phase candidate_phase = lock_phase == Phase::active ? Phase::active : Phase::initialized;
    const std::uint64_t next_generation = lock.stored.generation + 1;

    const std::uint64_t exchange_id = lock_random(lock, "puf/renew");
    link.lock.send(FrameType::renew_start, be_bytes(exchange_id, 8));

    auto start = recv_type(link.key, FrameType::renew_start);
    if (!start || start->payload.size() != 8) {
        out.reason = "renewal start lost";
        return out;
    }

    kljn::ExchangeSeeds seeds{
        derive_seed(key.entropy_seed, key.session_counter, "puf/kljn-switch"),
        derive_seed(lock.entropy_seed, lock.session_counter, "puf/kljn-switch"),
        derive_seed(key.entropy_seed, key.session_counter, "puf/kljn-noise"),
        derive_seed(lock.entropy_seed, lock.session_counter, "puf/kljn-noise"),
    };
    kljn::ExchangeOptions exchange_options;
    exchange_options.record_probes = true;
    std::shared_ptr<kljn::ExchangeTranscript> tx;
    try {
        tx = std::make_shared<kljn::ExchangeTranscript>(
            kljn::run_exchange(key.n_bits(), options.kljn, seeds, exchange_options));
    } catch (const kljn::ExchangeAborted& e) {
        out.reason = std::string("kljn aborted: ") + e.what();
        return out;
    }
    out.exchange = tx;

    link.key.send(FrameType::comparison, encode_probes(*tx, true));
    auto from_key = recv_type(link.lock, FrameType::comparison);
    if (!from_key || !check_peer_probes(*tx, from_key->payload, true)) {
        out.reason = "key comparison values lost";
        return out;
    }
    lock.pending = SecretKey{tx->key_bob, Origin::kljn_exchanged, next_generation};
    lock.phase = candidate_phase;
    link.lock.send(FrameType::comparison, encode_probes(*tx, false));

    auto from_lock = recv_type(link.key, FrameType::comparison);
    if (!from_lock || !check_peer_probes(*tx, from_lock->payload, false)) {
        lock_rollback(lock, lock_phase, false);
        out.reason = "lock comparison values lost";
        return out;
    }
    key.pending = SecretKey{tx->key_alice, Origin::kljn_exchanged, next_generation};
    key.phase = candidate_phase;

    link.lock.send(FrameType::commit, be_bytes(next_generation, 8));
    auto commit = recv_type(link.key, FrameType::commit);
    if (!commit || commit->payload.size() != 8 || read_be(commit->payload, 0, 8) != next_generation) {
        key_rollback(key, key_phase);
        lock_rollback(lock, lock_phase, true);
        out.reason = "commit lost";
        return out;
    }
    key.stored = *key.pending;
    key.pending.reset();
    key.phase = Phase::active;
    link.key.send(FrameType::commit_ack, be_bytes(next_generation, 8));

    auto ack = recv_type(link.lock, FrameType::commit_ack);
    if (!ack || ack->payload.size() != 8 || read_be(ack->payload, 0, 8) != next_generation) {
        lock_rollback(lock, lock_phase, true);
        out.reason = "commit acknowledgement lost";
        return out;
    }
    lock.stored = *lock.pending;
    lock.pending.reset();
    lock.phase = Phase::active;
    out.committed = true;
    return out;
}

ChallengeSession new_session(const PufDevice& lock, const Link& link) {
    ChallengeSession s;
    s.session_id = link.key.channel()->session_id();
    s.variant = lock.variant;
    return s;
}

bool locked_out(const PufDevice& lock, const ProtocolOptions& options, ChallengeSession& session) {
    if (options.lockout_after && lock.failed_attempts >= *options.lockout_after) {
        session.verdict = Verdict::aborted;
        session.reason = "locked out";
        return true;
    }
    return false;
}

void record_renewal(ChallengeSession& session, const RenewalOutcome& renewal, const Link& link) {
    session.renewal_attempted = true;
    session.renewed = renewal.committed;
    session.exchange = renewal.exchange;
    session.public_bits = link.stats().public_bits;
    if (session.public_bits > 0) session.authentication_bits = kljn::authentication_budget(session.public_bits);
    if (!renewal.committed) session.reason = renewal.reason;
}

enum class RoundResult { accepted, rejected, silent };

// One strong/simple challenge round against a single candidate key.
RoundResult strong_round(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options,
                         const SecretKey& candidate, ChallengeSession& session) {
    const auto challenge = lock_send_strong_challenge(lock, candidate, link.lock, options.m);
    session.nonce = challenge.start;
    key_answer_strong(key, link.key, options);
    auto report = lock_check_stream_response(lock, candidate, challenge, link.lock);
    if (!report) return RoundResult::silent;
    session.verify = *report;
    return report->accepted ? RoundResult::accepted : RoundResult::rejected;
}

}  // namespace

DevicePair provision(Variant variant, std::size_t n_bits, std::uint64_t manufacturer_seed,
                     std::uint64_t physical_entropy_seed) {
    if (n_bits < 1) throw std::invalid_argument("provision: n_bits must be >= 1");
    PufDevice key;
    key.role = Role::key;
    key.variant = variant;
    key.phase = variant == Variant::simple ? Phase::active : Phase::provisioned;
    key.stored = SecretKey{BitString::random(n_bits, derive_seed(manufacturer_seed, 0, "puf/manufacturer-key")),
                           Origin::manufacturer, 0};
    key.bank = nbl::GeneratorBank::from_seed(n_bits, derive_seed(manufacturer_seed, 0, "puf/bank"));
    key.entropy_seed = derive_seed(physical_entropy_seed, 0, "puf/key-entropy");

    PufDevice lock = key;
    lock.role = Role::lock;
    lock.entropy_seed = derive_seed(physical_entropy_seed, 0, "puf/lock-entropy");
    return {std::move(key), std::move(lock)};
}

PufDevice manufacturer_clone(Variant variant, std::size_t n_bits, std::uint64_t manufacturer_seed) {
    return provision(variant, n_bits, manufacturer_seed, derive_seed(manufacturer_seed, 0, "puf/manufacturer-entropy"))
        .key;
}

PufDevice counterfeit_key(const PufDevice& lock, const BitString& guessed_secret, std::uint64_t entropy_seed) {
    if (guessed_secret.size() != lock.n_bits()) throw std::invalid_argument("counterfeit_key: wrong key length");
    PufDevice fake;
    fake.role = Role::key;
    fake.variant = lock.variant;
    fake.phase = Phase::active;
    fake.stored = SecretKey{guessed_secret,
                            lock.variant == Variant::ultra ? Origin::kljn_exchanged : Origin::manufacturer,
                            lock.stored.generation};
    fake.bank = lock.bank;
    fake.entropy_seed = entropy_seed;
    return fake;
}

void reset_lockout(PufDevice& lock) noexcept { lock.failed_attempts = 0; }

StrongChallenge lock_send_strong_challenge(PufDevice& lock, const SecretKey& under, Endpoint& endpoint,
                                           std::size_t m) {
    if (m < 1 || m > 0xFFFFFFFFULL) throw std::invalid_argument("strong challenge: m out of range");
    ++lock.session_counter;
    StrongChallenge c;
    c.counter = lock.session_counter;
    // Fresh absolute start index per session; kept below 2^62 so cycle
    // indices never wrap.
    c.start = lock_random(lock, "puf/start") >> 2;
    c.m = static_cast<std::uint32_t>(m);
    c.plaintext = BitString::random(lock.n_bits(), lock_random(lock, "puf/challenge"));
    const auto ciphertext = apply_cipher(c.plaintext, under.bits, c.counter);

    std::vector<std::uint8_t> payload = be_bytes(c.counter, 8);
    const auto start = be_bytes(c.start, 8);
    const auto steps = be_bytes(c.m, 4);
    const auto packed = ciphertext.packed();
    payload.insert(payload.end(), start.begin(), start.end());
    payload.insert(payload.end(), steps.begin(), steps.end());
    payload.insert(payload.end(), packed.begin(), packed.end());
    endpoint.send(FrameType::strong_challenge, std::move(payload));
    return c;
}

bool key_answer_strong(PufDevice& key, Endpoint& endpoint, const ProtocolOptions& options) {
    auto frame = recv_type(endpoint, FrameType::strong_challenge);
    if (!frame) return false;
    ++key.session_counter;
    const std::size_t n = key.n_bits();
    const auto& p = frame->payload;
    nbl::RtwStream stream;
    if (p.size() == 20 + (n + 7) / 8 && read_be(p, 16, 4) >= 1) {
        const std::uint64_t counter = read_be(p, 0, 8);
        const std::uint64_t start = read_be(p, 8, 8);
        const auto m = static_cast<std::size_t>(read_be(p, 16, 4));
        const auto ciphertext = BitString::from_packed(std::span(p).subspan(20), n);
        const auto plaintext = apply_cipher(ciphertext, key.stored.bits, counter);
        const auto assignment = nbl::Assignment::from_secret(key.bank, key.stored.bits);
        stream = nbl::encode_string(key.bank, assignment, plaintext, m, start, nbl::StreamMode::product);
    } else {
        // Garbled challenge: answer with noise unrelated to the secret.
        noise::RtwGenerator gen(derive_seed(key.entropy_seed, key.session_counter, "puf/garbled"));
        stream.mode = nbl::StreamMode::product;
        for (std::size_t s = 0; s < options.m; ++s) stream.values.push_back(static_cast<std::int8_t>(gen.next()));
    }
    endpoint.send(FrameType::stream_response, nbl::encode_wire(stream));
    return true;
}

std::optional<nbl::VerifyReport> lock_check_stream_response(const PufDevice& lock, const SecretKey& candidate,
                                                            const StrongChallenge& challenge, Endpoint& endpoint) {
    auto frame = recv_type(endpoint, FrameType::stream_response);
    if (!frame) return std::nullopt;
    nbl::RtwStream stream;
    try {
        stream = nbl::decode_wire(frame->payload);
    } catch (const std::invalid_argument&) {
        return nbl::VerifyReport{};
    }
    if (stream.mode != nbl::StreamMode::product || stream.size() != challenge.m || stream.start != challenge.start) {
        return nbl::VerifyReport{};
    }
    const auto assignment = nbl::Assignment::from_secret(lock.bank, candidate.bits);
    return nbl::verify_stream(lock.bank, assignment, challenge.plaintext, stream, nbl::StreamMode::product);
}

std::uint64_t lock_send_ultra_challenge(PufDevice& lock, Endpoint& endpoint) {
    ++lock.session_counter;
    const std::uint64_t nonce = lock_random(lock, "puf/ultra-nonce");
    endpoint.send(FrameType::challenge, be_bytes(nonce, 8));
    return nonce;
}

bool key_answer_ultra(PufDevice& key, Endpoint& endpoint, const ProtocolOptions& options) {
    auto frame = recv_type(endpoint, FrameType::challenge);
    if (!frame) return false;
    ++key.session_counter;
    BitString response;
    if (frame->payload.size() == 8) {
        const std::uint64_t nonce = read_be(frame->payload, 0, 8);
        response = options.raw_ultra_response ? key.stored.bits : one_time_response(key.stored.bits, nonce);
    } else {
        response = BitString::random(key.n_bits(), derive_seed(key.entropy_seed, key.session_counter, "puf/garbled"));
    }
    endpoint.send(FrameType::response, response.packed());
    return true;
}

ChallengeSession initialize(PufDevice& key, PufDevice& lock, Link& link, const ProtocolOptions& options) {
    if (lock.variant == Variant::simple) throw std::invalid_argument("initialize: the simple variant has no init step");
    if (lock.role != Role::lock || key.role != Role::key) throw std::invalid_argument("initialize: role mismatch");
    if (lock.phase == Phase::active) throw std::invalid_argument("initialize: lock is already active");
    options.kljn.validate();

    auto session = new_session(lock, link);
    if (locked_out(lock, options, session)) return session;

    // An in-doubt lock also tries its pending key: the key may have
    // committed before the acknowledgement was lost.
    std::vector<std::pair<SecretKey, bool>> candidates{{lock.stored, false}};
    if (lock.pending) candidates.emplace_back(*lock.pending, true);

    for (const auto& [candidate, is_pending] : candidates) {
        const auto result = strong_round(lock, key, link, options, candidate, session);
        if (result == RoundResult::silent) {
            session.reason = "recognition response lost";
            return session;
        }
        if (result == RoundResult::rejected) continue;

        lock.failed_attempts = 0;
        if (is_pending) {
            lock.stored = *lock.pending;
            lock.pending.reset();
            lock.phase = Phase::active;
            session.verdict = Verdict::accept;
            session.reason = "resynchronized pending key";
            return session;
        }
        lock.pending.reset();
        const auto renewal = renew(key, lock, link, options);
        record_renewal(session, renewal, link);
        session.verdict = renewal.committed ? Verdict::accept : Verdict::aborted;
        return session;
    }
    ++lock.failed_attempts;
    session.reason = "recognition failed";
    return session;
}

ChallengeSession challenge_ultra(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options) {
    if (lock.variant != Variant::ultra) throw std::invalid_argument("challenge_ultra: lock is not ultra-strong");
    if (lock.phase != Phase::active) throw std::invalid_argument("challenge_ultra: lock is not active");

    auto session = new_session(lock, link);
    if (locked_out(lock, options, session)) return session;

    session.nonce = lock_send_ultra_challenge(lock, link.lock);
    key_answer_ultra(key, link.key, options);
    auto frame = recv_type(link.lock, FrameType::response);
    if (!frame) {
        session.reason = "response lost";
        return session;
    }

    auto expected = [&](const SecretKey& k) {
        return options.raw_ultra_response ? k.bits : one_time_response(k.bits, session.nonce);
    };
    const std::size_t n = lock.n_bits();
    bool matched = false;
    if (frame->payload.size() == (n + 7) / 8) {
        const auto response = BitString::from_packed(frame->payload, n);
        if (response == expected(lock.stored)) {
            matched = true;
            lock.pending.reset();
        } else if (lock.pending && response == expected(*lock.pending)) {
            matched = true;
            lock.stored = *lock.pending;
            lock.pending.reset();
        }
    }
    if (!matched) {
        ++lock.failed_attempts;
        session.verdict = Verdict::reject;
        session.reason = "response mismatch";
        return session;
    }
    lock.failed_attempts = 0;
    session.verdict = Verdict::accept;
    session.secure_bits_consumed = n;

    const auto renewal = renew(key, lock, link, options);
    record_renewal(session, renewal, link);
    return session;
}

namespace {

ChallengeSession challenge_nbl(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options) {
    if (lock.phase != Phase::active) throw std::invalid_argument("challenge: lock is not active");
    if (options.m < 1) throw std::invalid_argument("challenge: m must be >= 1");

    auto session = new_session(lock, link);
    if (locked_out(lock, options, session)) return session;

    const auto result = strong_round(lock, key, link, options, lock.stored, session);
    switch (result) {
        case RoundResult::silent:
            session.reason = "response lost";
            break;
        case RoundResult::rejected:
            ++lock.failed_attempts;
            session.verdict = Verdict::reject;
            session.reason = "stream mismatch";
            break;
        case RoundResult::accepted:
            lock.failed_attempts = 0;
            session.verdict = Verdict::accept;
            break;
    }
    return session;
}

}  // namespace

ChallengeSession challenge_strong(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options) {
    if (lock.variant == Variant::ultra) throw std::invalid_argument("challenge_strong: lock is ultra-strong");
    return challenge_nbl(lock, key, link, options);
}

ChallengeSession challenge_simple(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options) {
    if (lock.variant != Variant::simple) throw std::invalid_argument("challenge_simple: lock is not simple");
    return challenge_nbl(lock, key, link, options);
}

ChallengeSession challenge(PufDevice& lock, PufDevice& key, Link& link, const ProtocolOptions& options) {
    switch (lock.variant) {
        case Variant::ultra: return challenge_ultra(lock, key, link, options);
        case Variant::strong: return challenge_strong(lock, key, link, options);
        case Variant::simple: return challenge_simple(lock, key, link, options);
    }
    throw std::logic_error("challenge: unknown variant");
}

}  // namespace noisepuf::puf
