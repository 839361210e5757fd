#include "noisepuf/transport.hpp"

#include <stdexcept>

namespace noisepuf::transport {

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t value, int bytes) {
    for (int shift = (bytes - 1) * 8; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(value >> shift));
}

std::uint64_t get_be(std::span<const std::uint8_t> bytes, std::size_t offset, int count) {
    std::uint64_t v = 0;
    for (int k = 0; k < count; ++k) v = (v << 8) | bytes[offset + static_cast<std::size_t>(k)];
    return v;
}

constexpr std::size_t kHeaderBytes = 17;

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() > 0xFFFFFFFFULL) throw std::invalid_argument("encode_frame: payload too large");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + frame.payload.size());
    put_be(out, frame.session_id, 8);
    put_be(out, frame.sequence, 4);
    out.push_back(static_cast<std::uint8_t>(frame.type));
    put_be(out, frame.payload.size(), 4);
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) throw std::invalid_argument("decode_frame: truncated header");
    Frame f;
    f.session_id = get_be(bytes, 0, 8);
    f.sequence = static_cast<std::uint32_t>(get_be(bytes, 8, 4));
    const auto tag = bytes[12];
    if (tag < 1 || tag > 8) throw std::invalid_argument("decode_frame: unknown type tag");
    f.type = static_cast<FrameType>(tag);
    const auto len = get_be(bytes, 13, 4);
    if (bytes.size() != kHeaderBytes + len) throw std::invalid_argument("decode_frame: payload length mismatch");
    f.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
    return f;
}

void account_public_bits(ChannelStats& stats, const Frame& frame) {
    if (frame.is_comparison_traffic()) stats.public_bits += 8ULL * frame.payload.size();
}

ChannelStats Channel::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void Endpoint::send(FrameType type, std::vector<std::uint8_t> payload) {
    auto& ch = *channel_;
    std::lock_guard lock(ch.mutex_);
    auto& dir = ch.directions_[static_cast<int>(side_)];
    const std::uint64_t index = dir.frames_sent++;
    Frame frame{ch.session_id_, dir.next_sequence++, type, std::move(payload)};
    ++ch.stats_.frames_sent;
    account_public_bits(ch.stats_, frame);

    if (dir.fault && index >= dir.fault->first) {
        ++ch.stats_.faults_injected;
        if (dir.fault->second == FaultKind::drop_rest) return;
        frame.payload.resize(frame.payload.size() / 2);
    }
    dir.queue.push_back(std::move(frame));
}

std::optional<Frame> Endpoint::try_recv() {
    auto& ch = *channel_;
    std::lock_guard lock(ch.mutex_);
    auto& dir = ch.directions_[side_ == Side::key ? 1 : 0];
    if (dir.queue.empty()) return std::nullopt;
    Frame f = std::move(dir.queue.front());
    dir.queue.pop_front();
    return f;
}

void Endpoint::inject_fault(std::uint64_t at_frame, FaultKind kind) {
    std::lock_guard lock(channel_->mutex_);
    channel_->directions_[static_cast<int>(side_)].fault = std::make_pair(at_frame, kind);
}

std::uint64_t Endpoint::frames_sent() const {
    std::lock_guard lock(channel_->mutex_);
    return channel_->directions_[static_cast<int>(side_)].frames_sent;
}

Link open_session(std::uint64_t session_id) {
    auto channel = std::make_shared<Channel>(session_id);
    return Link{Endpoint(channel, Side::key), Endpoint(channel, Side::lock)};
}

}  // namespace noisepuf::transport
