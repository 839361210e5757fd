#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "noisepuf/bits.hpp"
#include "noisepuf/kljn.hpp"
#include "noisepuf/nbl.hpp"
#include "noisepuf/transport.hpp"

namespace noisepuf::puf {

enum class Variant : std::uint8_t { ultra, strong, simple };
enum class Role : std::uint8_t { key, lock };
/// provisioned: manufacturer key only. initialized: a fresh key is pending
/// commit. active: in service.
enum class Phase : std::uint8_t { provisioned, initialized, active };
enum class Origin : std::uint8_t { manufacturer, kljn_exchanged };
enum class Verdict : std::uint8_t { accept, reject, aborted };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(Role r) noexcept;
std::string_view to_string(Phase p) noexcept;
std::string_view to_string(Origin o) noexcept;
std::string_view to_string(Verdict v) noexcept;
Variant parse_variant(std::string_view text);
Role parse_role(std::string_view text);
Phase parse_phase(std::string_view text);
Origin parse_origin(std::string_view text);

struct SecretKey {
    BitString bits;
    Origin origin = Origin::manufacturer;
    std::uint64_t generation = 0;

    friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

struct PufDevice {
    Role role = Role::key;
    Variant variant = Variant::ultra;
    Phase phase = Phase::provisioned;
    SecretKey stored;
    /// Candidate key between renewal start and commit. At rest only a lock
    /// can hold one: it sent the commit but never saw the acknowledgement.
    std::optional<SecretKey> pending;
    /// Public generators. Every variant holds one; the ultra variant uses it
    /// only for recognition during initialization.
    nbl::GeneratorBank bank;
    std::uint64_t session_counter = 0;
    /// Device-private randomness: switch states, noise, nonces, challenges.
    std::uint64_t entropy_seed = 0;
    std::uint32_t failed_attempts = 0;

    std::size_t n_bits() const noexcept { return stored.bits.size(); }
    friend bool operator==(const PufDevice&, const PufDevice&) = default;
};

/// Throws std::logic_error when a device violates a variant invariant.
void check_invariants(const PufDevice& device);

struct ProtocolOptions {
    kljn::KljnParams kljn{};
    /// RTW steps sent per strong/simple response.
    std::size_t m = 83;
    /// Send the stored key itself instead of its nonce-masked form.
    bool raw_ultra_response = false;
    /// Reject sessions once this many failed attempts accumulate.
    std::optional<std::uint32_t> lockout_after;
};

struct ChallengeSession {
    std::uint64_t session_id = 0;
    Variant variant = Variant::ultra;
    std::uint64_t nonce = 0;
    Verdict verdict = Verdict::aborted;
    std::string reason;
    std::optional<nbl::VerifyReport> verify;
    bool renewal_attempted = false;
    bool renewed = false;
    /// Key bits spent by the challenge itself (N for the one-time pad).
    std::size_t secure_bits_consumed = 0;
    /// ceil(log2 F) for the renewal's comparison traffic.
    unsigned authentication_bits = 0;
    /// F as counted by the transport.
    std::uint64_t public_bits = 0;
    std::shared_ptr<const kljn::ExchangeTranscript> exchange;
};

struct DevicePair {
    PufDevice key;
    PufDevice lock;
};

/// Both devices get the manufacturer key and the public bank. The
/// entropy seed stands in for physical randomness the manufacturer does not
/// know. Simple devices start active.
DevicePair provision(Variant variant, std::size_t n_bits, std::uint64_t manufacturer_seed,
                     std::uint64_t physical_entropy_seed);

/// What the manufacturer can build from its own records: a key device with
/// the manufacturer key and manufacturer-chosen entropy.
PufDevice manufacturer_clone(Variant variant, std::size_t n_bits, std::uint64_t manufacturer_seed);

/// Counterfeit key with a guessed secret and the public bank of `lock`.
PufDevice counterfeit_key(const PufDevice& lock, const BitString& guessed_secret, std::uint64_t entropy_seed);

/// Recognition by the manufacturer key, then a KLJN exchange and two-phase
/// commit of the fresh key (ultra and strong variants).
ChallengeSession initialize(PufDevice& key, PufDevice& lock, transport::Link& link, const ProtocolOptions& options);

ChallengeSession challenge_ultra(PufDevice& lock, PufDevice& key, transport::Link& link,
                                 const ProtocolOptions& options);
ChallengeSession challenge_strong(PufDevice& lock, PufDevice& key, transport::Link& link,
                                  const ProtocolOptions& options);
ChallengeSession challenge_simple(PufDevice& lock, PufDevice& key, transport::Link& link,
                                  const ProtocolOptions& options);
/// Dispatches on the lock's variant.
ChallengeSession challenge(PufDevice& lock, PufDevice& key, transport::Link& link, const ProtocolOptions& options);

void reset_lockout(PufDevice& lock) noexcept;

// Message-level steps, used by the drivers above and by attackers that
// replace one side of the conversation.

/// Challenge the lock sent in a strong/simple round.
struct StrongChallenge {
    std::uint64_t counter = 0;
    std::uint64_t start = 0;
    std::uint32_t m = 0;
    BitString plaintext;
};

StrongChallenge lock_send_strong_challenge(PufDevice& lock, const SecretKey& under, transport::Endpoint& endpoint,
                                           std::size_t m);
/// Verifies the next stream_response on the endpoint against `candidate`.
/// Empty when nothing arrived.
std::optional<nbl::VerifyReport> lock_check_stream_response(const PufDevice& lock, const SecretKey& candidate,
                                                            const StrongChallenge& challenge,
                                                            transport::Endpoint& endpoint);
/// Answers one strong_challenge with the key's stored secret. Returns false
/// when no challenge was waiting.
bool key_answer_strong(PufDevice& key, transport::Endpoint& endpoint, const ProtocolOptions& options);

std::uint64_t lock_send_ultra_challenge(PufDevice& lock, transport::Endpoint& endpoint);
bool key_answer_ultra(PufDevice& key, transport::Endpoint& endpoint, const ProtocolOptions& options);

/// Device state record: versioned JSON with a checksum.
std::string save_state(const PufDevice& device);
/// Throws IntegrityError on a corrupted or truncated record.
PufDevice load_state(std::string_view record);
/// Writes to a temporary file and renames it over `path`.
void write_state_file(const std::string& path, const PufDevice& device);
PufDevice read_state_file(const std::string& path);

}  // namespace noisepuf::puf
