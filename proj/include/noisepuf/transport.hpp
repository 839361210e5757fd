#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace noisepuf::transport {

enum class FrameType : std::uint8_t {
    challenge = 1,         // ultra: lock nonce
    response = 2,          // ultra: masked key
    strong_challenge = 3,  // encrypted challenge string + stream parameters
    stream_response = 4,   // RTW stream, nbl wire format
    renew_start = 5,
    comparison = 6,        // instantaneous comparison values, authenticated public traffic
    commit = 7,
    commit_ack = 8,
};

struct Frame {
    std::uint64_t session_id = 0;
    std::uint32_t sequence = 0;
    FrameType type = FrameType::challenge;
    std::vector<std::uint8_t> payload;

    bool is_comparison_traffic() const noexcept { return type == FrameType::comparison; }
    friend bool operator==(const Frame&, const Frame&) = default;
};

/// session id (8) | sequence (4) | type (1) | payload length (4) | payload,
/// all integers big-endian.
std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Throws std::invalid_argument on malformed input.
Frame decode_frame(std::span<const std::uint8_t> bytes);

struct ChannelStats {
    /// F: bits of comparison traffic only.
    std::uint64_t public_bits = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t faults_injected = 0;
};

/// Adds the payload bit length of a comparison frame to F; other frames
/// leave the stats untouched.
void account_public_bits(ChannelStats& stats, const Frame& frame);

enum class FaultKind : std::uint8_t {
    drop_rest,  // the frame at the index and everything after it vanish
    truncate,   // those frames arrive with half their payload
};

enum class Side : std::uint8_t { key = 0, lock = 1 };

class Endpoint;

/// Shared state of one simulated session: one queue per direction.
class Channel {
public:
    explicit Channel(std::uint64_t session_id) : session_id_(session_id) {}

    std::uint64_t session_id() const noexcept { return session_id_; }
    ChannelStats stats() const;

private:
    friend class Endpoint;

    struct Direction {
        std::deque<Frame> queue;
        std::uint32_t next_sequence = 0;
        std::uint64_t frames_sent = 0;
        std::optional<std::pair<std::uint64_t, FaultKind>> fault;
    };

    std::uint64_t session_id_;
    mutable std::mutex mutex_;
    Direction directions_[2];  // indexed by sending side
    ChannelStats stats_;
};

/// One side of a session. send() never blocks; try_recv() returns nothing
/// when the queue is empty (the peer is silent or its frames were dropped).
class Endpoint {
public:
    Endpoint(std::shared_ptr<Channel> channel, Side side) : channel_(std::move(channel)), side_(side) {}

    void send(FrameType type, std::vector<std::uint8_t> payload);
    std::optional<Frame> try_recv();

    /// Frames this endpoint sends from index `at_frame` on (0 = its first
    /// frame) are dropped or truncated.
    void inject_fault(std::uint64_t at_frame, FaultKind kind);

    Side side() const noexcept { return side_; }
    std::uint64_t frames_sent() const;
    ChannelStats stats() const { return channel_->stats(); }
    const std::shared_ptr<Channel>& channel() const noexcept { return channel_; }

private:
    std::shared_ptr<Channel> channel_;
    Side side_;
};

struct Link {
    Endpoint key;
    Endpoint lock;

    ChannelStats stats() const { return key.stats(); }
};

/// Ideal, ordered, lossless channel between a key and a lock.
Link open_session(std::uint64_t session_id = 0);

}  // namespace noisepuf::transport
