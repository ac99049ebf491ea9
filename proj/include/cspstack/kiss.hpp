#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cspstack/buffer_pool.hpp"
#include "cspstack/core.hpp"

namespace cspstack {

namespace kiss {
inline constexpr std::uint8_t FEND = 0xC0;
inline constexpr std::uint8_t FESC = 0xDB;
inline constexpr std::uint8_t TFEND = 0xDC;
inline constexpr std::uint8_t TFESC = 0xDD;
}  // namespace kiss

/// FEND, escaped (header ++ data), FEND. No KISS command byte.
std::vector<std::uint8_t> kiss_encode(const CspPacket& p);

enum class KissDrop : std::uint8_t { NoBuffer, Runt, Oversize };

constexpr std::string_view to_string(KissDrop d) noexcept {
    switch (d) {
        case KissDrop::NoBuffer: return "NoBuffer";
        case KissDrop::Runt: return "Runt";
        case KissDrop::Oversize: return "Oversize";
    }
    return "Unknown";
}

struct KissEvent {
    enum class Kind : std::uint8_t { Delivered, Dropped };

    Kind kind = Kind::Dropped;
    KissDrop reason = KissDrop::NoBuffer;  // meaningful only when Dropped
    PacketBuffer packet{};                 // meaningful only when Delivered

    friend bool operator==(const KissEvent& a, const KissEvent& b) noexcept {
        if (a.kind != b.kind) return false;
        if (a.kind == Kind::Dropped) return a.reason == b.reason;
        return a.packet.handle == b.packet.handle && a.packet.id == b.packet.id &&
               a.packet.length == b.packet.length;
    }
};

/// Incremental KISS deframer writing straight into pool buffers.
///
/// A buffer is acquired when a frame opens. If the pool is exhausted the
/// decoder reports NoBuffer and discards up to the closing FEND instead of
/// writing anywhere. Escape sequences other than TFEND/TFESC pass the byte
/// through unchanged.
class KissDecoder {
public:
    enum class State : std::uint8_t { Idle, InFrame, Escaped, Discard };

    KissDecoder(BufferPool& pool, std::size_t max_data_len) noexcept;
    ~KissDecoder();

    KissDecoder(const KissDecoder&) = delete;
    KissDecoder& operator=(const KissDecoder&) = delete;

    /// Appends one event per completed or dropped frame to `out`.
    void push(std::span<const std::uint8_t> bytes, std::vector<KissEvent>& out);
    std::vector<KissEvent> push(std::span<const std::uint8_t> bytes);

    /// Returns any held buffer to the pool and goes back to Idle.
    void reset() noexcept;

    State state() const noexcept { return state_; }
    bool holds_buffer() const noexcept { return current_.has_value(); }
    const Stats& stats() const noexcept { return stats_; }

private:
    void open_frame(std::vector<KissEvent>& out);
    void close_frame(std::vector<KissEvent>& out);
    void put(std::uint8_t byte, std::vector<KissEvent>& out);
    void drop(KissDrop reason, std::vector<KissEvent>& out);

    BufferPool& pool_;
    std::size_t max_data_len_;
    State state_ = State::Idle;
    std::optional<BufferHandle> current_;
    std::span<std::uint8_t> storage_;
    std::array<std::uint8_t, kHeaderBytes> header_{};
    std::size_t fill_ = 0;  // unescaped bytes, header included
    Stats stats_{};
};

}  // namespace cspstack
