#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cspstack/buffer_pool.hpp"
#include "cspstack/core.hpp"

namespace cspstack {

inline constexpr std::uint32_t kCanExtIdMask = 0x1FFF'FFFFu;
inline constexpr std::size_t kCanMaxDlc = 8;
/// BEGIN payload prefix: 2-byte big-endian data length + 4-byte CSP header.
inline constexpr std::size_t kBeginOverhead = 2 + kHeaderBytes;
inline constexpr std::size_t kBeginDataCapacity = kCanMaxDlc - kBeginOverhead;

enum class FragmentKind : std::uint8_t { Begin = 0, More = 1 };

/// 29-bit CAN fragmentation header.
struct CfpId {
    std::uint8_t source = 0;
    std::uint8_t destination = 0;
    FragmentKind kind = FragmentKind::Begin;
    std::uint8_t remain = 0;
    std::uint16_t identifier = 0;

    friend constexpr bool operator==(const CfpId&, const CfpId&) = default;
};

// Layout, MSB first within 29 bits: src:5 dst:5 kind:1 remain:8 ident:10.
constexpr std::uint32_t cfp_pack(const CfpId& id) noexcept {
    return (std::uint32_t{id.source} & 0x1Fu) << 24 | (std::uint32_t{id.destination} & 0x1Fu) << 19 |
           static_cast<std::uint32_t>(id.kind) << 18 | std::uint32_t{id.remain} << 10 |
           (std::uint32_t{id.identifier} & 0x3FFu);
}

constexpr CfpId cfp_unpack_masked(std::uint32_t ext_id) noexcept {
    return CfpId{
        .source = static_cast<std::uint8_t>(ext_id >> 24 & 0x1Fu),
        .destination = static_cast<std::uint8_t>(ext_id >> 19 & 0x1Fu),
        .kind = (ext_id >> 18 & 1u) != 0 ? FragmentKind::More : FragmentKind::Begin,
        .remain = static_cast<std::uint8_t>(ext_id >> 10 & 0xFFu),
        .identifier = static_cast<std::uint16_t>(ext_id & 0x3FFu),
    };
}

constexpr Expected<CfpId> cfp_unpack(std::uint32_t ext_id) noexcept {
    if (ext_id > kCanExtIdMask) {
        return fail(Error::InvalidId);
    }
    return cfp_unpack_masked(ext_id);
}

struct CanFrame {
    std::uint32_t ext_id = 0;
    std::uint8_t dlc = 0;
    std::array<std::uint8_t, kCanMaxDlc> data{};

    std::span<const std::uint8_t> payload() const noexcept {
        return std::span<const std::uint8_t>(data).first(std::min<std::size_t>(dlc, kCanMaxDlc));
    }

    static constexpr CanFrame make(std::uint32_t ext_id, std::span<const std::uint8_t> bytes) noexcept {
        CanFrame f;
        f.ext_id = ext_id & 0x1FFF'FFFFu;
        f.dlc = static_cast<std::uint8_t>(std::min(bytes.size(), kCanMaxDlc));
        std::copy_n(bytes.begin(), f.dlc, f.data.begin());
        return f;
    }

    friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

/// Splits a packet into one BEGIN frame and as many MORE frames as needed.
Expected<std::vector<CanFrame>> fragment(const CspPacket& p, std::uint16_t identifier,
                                         std::size_t max_data_len);

/// `IIIIIIII#DD..DD` text form, uppercase hex.
std::string format_frame(const CanFrame& f);
Expected<CanFrame> parse_frame(std::string_view line);

struct FrameParseResult {
    std::vector<CanFrame> frames;
    std::size_t bad_line = 0;  // 1-based, 0 when every line parsed
};

/// One frame per line; blank lines and lines starting with `#` are skipped.
FrameParseResult parse_frame_lines(std::string_view text);

enum class DropReason : std::uint8_t {
    BadDlc,
    LengthExceedsBuffer,
    NoBuffer,
    NoMatchingBegin,
    RemainMismatch,
    Overflow,
    Truncated,
};

inline constexpr std::size_t kDropReasonCount = 7;

constexpr std::string_view to_string(DropReason r) noexcept {
    switch (r) {
        case DropReason::BadDlc: return "BadDlc";
        case DropReason::LengthExceedsBuffer: return "LengthExceedsBuffer";
        case DropReason::NoBuffer: return "NoBuffer";
        case DropReason::NoMatchingBegin: return "NoMatchingBegin";
        case DropReason::RemainMismatch: return "RemainMismatch";
        case DropReason::Overflow: return "Overflow";
        case DropReason::Truncated: return "Truncated";
    }
    return "Unknown";
}

enum class RxKind : std::uint8_t { Delivered, Consumed, Dropped };

struct RxOutcome {
    RxKind kind = RxKind::Consumed;
    DropReason reason = DropReason::BadDlc;  // meaningful only when Dropped
    PacketBuffer packet{};                   // meaningful only when Delivered

    static constexpr RxOutcome delivered(PacketBuffer p) noexcept {
        return {RxKind::Delivered, DropReason::BadDlc, p};
    }
    static constexpr RxOutcome consumed() noexcept { return {}; }
    static constexpr RxOutcome dropped(DropReason r) noexcept {
        return {RxKind::Dropped, r, {}};
    }

    bool is_dropped(DropReason r) const noexcept { return kind == RxKind::Dropped && reason == r; }
};

using Millis = std::uint64_t;
inline constexpr Millis kForever = std::numeric_limits<Millis>::max();

/// Reassembles CAN fragment streams into pool buffers.
///
/// Holds at most `rx_slot_count` concurrent streams keyed by (source,
/// destination, identifier) in fixed storage; never allocates. Not
/// thread-safe: one engine per interface, calls serialized by the owner.
/// Several engines may share one thread-safe pool.
///
/// Every buffer the engine acquires ends up in exactly one place: an active
/// slot, a Delivered outcome (now owned by the caller), or back in the pool.
template <PacketPool Pool>
class BasicRxEngine {
public:
    BasicRxEngine(Pool& pool, const Config& cfg) noexcept
        : pool_(pool),
          max_data_len_(std::min(cfg.max_data_len, pool.max_data_len())),
          slot_count_(std::clamp<std::size_t>(cfg.rx_slot_count, 1, kMaxRxSlots)),
          timeout_ms_(cfg.reassembly_timeout_ms) {}

    BasicRxEngine(const BasicRxEngine&) = delete;
    BasicRxEngine& operator=(const BasicRxEngine&) = delete;

    ~BasicRxEngine() { reset(); }

    RxOutcome can_rx(const CanFrame& frame, Millis now) noexcept {
        if (frame.dlc > kCanMaxDlc) {
            ++stats_.rx_dropped_len;
            return RxOutcome::dropped(DropReason::BadDlc);
        }
        const CfpId id = cfp_unpack_masked(frame.ext_id & kCanExtIdMask);
        return id.kind == FragmentKind::Begin ? on_begin(id, frame, now) : on_more(id, frame, now);
    }

    /// Releases every slot whose deadline lies strictly before `now`.
    std::size_t poll_timeouts(Millis now) noexcept {
        std::size_t evicted = 0;
        for (std::size_t i = 0; i < slot_count_; ++i) {
            auto& slot = slots_[i];
            if (slot.active && slot.deadline < now) {
                free_slot(slot);
                ++stats_.rx_timeout;
                ++evicted;
            }
        }
        return evicted;
    }

    /// Drops all in-progress streams without counting them.
    void reset() noexcept {
        for (auto& slot : slots_) {
            if (slot.active) free_slot(slot);
        }
    }

    std::size_t active_slots() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(slots_.begin(), slots_.end(), [](const Slot& s) { return s.active; }));
    }
    std::size_t slot_count() const noexcept { return slot_count_; }
    std::size_t max_data_len() const noexcept { return max_data_len_; }
    const Stats& stats() const noexcept { return stats_; }

private:
    struct Key {
        std::uint8_t source = 0;
        std::uint8_t destination = 0;
        std::uint16_t identifier = 0;
        friend constexpr bool operator==(const Key&, const Key&) = default;
    };

    struct Slot {
        bool active = false;
        Key key;
        BufferHandle buffer;
        CspId header;
        std::uint16_t expected_total_len = 0;
        std::uint16_t received_len = 0;
        std::uint8_t last_remain = 0;
        Millis deadline = 0;
    };

    static constexpr Key key_of(const CfpId& id) noexcept {
        return Key{id.source, id.destination, id.identifier};
    }

    Millis deadline_from(Millis now) const noexcept {
        return now > kForever - timeout_ms_ ? kForever : now + timeout_ms_;
    }

    Slot* find(const Key& key) noexcept {
        for (std::size_t i = 0; i < slot_count_; ++i) {
            if (slots_[i].active && slots_[i].key == key) return &slots_[i];
        }
        return nullptr;
    }

    void free_slot(Slot& slot) noexcept {
        (void)pool_.release(slot.buffer);
        slot.active = false;
    }

    Slot& claim_slot(Millis now) noexcept {
        Slot* oldest = nullptr;
        for (std::size_t i = 0; i < slot_count_; ++i) {
            if (!slots_[i].active) return slots_[i];
        }
        for (std::size_t i = 0; i < slot_count_; ++i) {
            auto& s = slots_[i];
            if (s.deadline < now) {
                free_slot(s);
                ++stats_.rx_timeout;
                return s;
            }
            if (oldest == nullptr || s.deadline < oldest->deadline) oldest = &s;
        }
        // Every slot is live: the stream closest to its deadline gives way.
        free_slot(*oldest);
        ++stats_.rx_preempted;
        return *oldest;
    }

    RxOutcome drop_slot(Slot& slot, DropReason reason, std::uint64_t& counter) noexcept {
        free_slot(slot);
        ++counter;
        return RxOutcome::dropped(reason);
    }

    RxOutcome deliver(Slot& slot) noexcept {
        const PacketBuffer packet{slot.buffer, slot.header, slot.received_len};
        slot.active = false;  // ownership moves to the caller
        ++stats_.rx_delivered;
        return RxOutcome::delivered(packet);
    }

    bool append(Slot& slot, std::span<const std::uint8_t> bytes) noexcept {
        const auto dst = pool_.storage(slot.buffer);
        const std::size_t end = std::size_t{slot.received_len} + bytes.size();
        if (end > slot.expected_total_len || end > dst.size()) return false;
        std::copy(bytes.begin(), bytes.end(), dst.begin() + slot.received_len);
        slot.received_len = static_cast<std::uint16_t>(end);
        return true;
    }

    RxOutcome on_begin(const CfpId& id, const CanFrame& frame, Millis now) noexcept {
        if (frame.dlc < kBeginOverhead) {
            ++stats_.rx_dropped_len;
            return RxOutcome::dropped(DropReason::BadDlc);
        }
        const auto payload = frame.payload();
        const std::size_t total = load_be16(payload.template first<2>());
        // Validate the declared size before any buffer is touched.
        if (total > max_data_len_) {
            ++stats_.rx_dropped_len;
            return RxOutcome::dropped(DropReason::LengthExceedsBuffer);
        }
        const auto first_data = payload.subspan(kBeginOverhead);
        if (first_data.size() > total) {
            ++stats_.rx_dropped_overflow;
            return RxOutcome::dropped(DropReason::Overflow);
        }

        const Key key = key_of(id);
        if (Slot* previous = find(key)) {
            free_slot(*previous);
            ++stats_.rx_preempted;
        }

        Slot& slot = claim_slot(now);
        auto buffer = pool_.acquire();
        if (!buffer) {
            ++stats_.rx_no_buffer;
            return RxOutcome::dropped(DropReason::NoBuffer);
        }

        const CspId header = decode_csp_header(load_be32(payload.template subspan<2, 4>()));
        if (header.source != id.source || header.destination != id.destination) {
            ++stats_.rx_addr_mismatch;
        }
        slot = Slot{
            .active = true,
            .key = key,
            .buffer = *buffer,
            .header = header,
            .expected_total_len = static_cast<std::uint16_t>(total),
            .received_len = 0,
            .last_remain = id.remain,
            .deadline = deadline_from(now),
        };
        if (!append(slot, first_data)) {
            return drop_slot(slot, DropReason::Overflow, stats_.rx_dropped_overflow);
        }

        if (id.remain == 0) {
            if (slot.received_len == slot.expected_total_len) return deliver(slot);
            return drop_slot(slot, DropReason::Truncated, stats_.rx_dropped_truncated);
        }
        return RxOutcome::consumed();
    }

    RxOutcome on_more(const CfpId& id, const CanFrame& frame, Millis now) noexcept {
        Slot* slot = find(key_of(id));
        if (slot == nullptr) {
            ++stats_.rx_dropped_no_begin;
            return RxOutcome::dropped(DropReason::NoMatchingBegin);
        }
        if (slot->last_remain == 0 || id.remain != slot->last_remain - 1) {
            return drop_slot(*slot, DropReason::RemainMismatch, stats_.rx_dropped_sequence);
        }
        // An exact fill (received + dlc == expected) is legal; one byte more is not.
        if (std::size_t{slot->received_len} + frame.dlc > slot->expected_total_len) {
            return drop_slot(*slot, DropReason::Overflow, stats_.rx_dropped_overflow);
        }
        if (!append(*slot, frame.payload())) {
            return drop_slot(*slot, DropReason::Overflow, stats_.rx_dropped_overflow);
        }

        if (id.remain == 0) {
            if (slot->received_len == slot->expected_total_len) return deliver(*slot);
            return drop_slot(*slot, DropReason::Truncated, stats_.rx_dropped_truncated);
        }
        slot->last_remain = id.remain;
        slot->deadline = deadline_from(now);
        return RxOutcome::consumed();
    }

    Pool& pool_;
    std::size_t max_data_len_;
    std::size_t slot_count_;
    Millis timeout_ms_;
    std::array<Slot, kMaxRxSlots> slots_{};
    Stats stats_{};
};

using RxEngine = BasicRxEngine<BufferPool>;

}  // namespace cspstack
