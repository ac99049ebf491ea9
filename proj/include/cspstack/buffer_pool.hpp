#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "cspstack/core.hpp"

namespace cspstack {

/// Generation-tagged reference to one pool slot. A plain pair of integers so
/// it can cross a C boundary unchanged.
struct BufferHandle {
    std::uint32_t slot = 0;
    std::uint32_t generation = 0;

    friend constexpr bool operator==(const BufferHandle&, const BufferHandle&) = default;
};

/// A reassembled packet that still lives in its pool buffer. Moving this
/// value around is the zero-copy handoff; bytes stay where they were written.
struct PacketBuffer {
    BufferHandle handle;
    CspId id;
    std::uint16_t length = 0;
};

/// What the reassembly and KISS engines need from a buffer provider.
template <class P>
concept PacketPool = requires(P& pool, const P& cpool, BufferHandle h) {
    { pool.acquire() } -> std::same_as<Expected<BufferHandle>>;
    { pool.release(h) } -> std::same_as<Status>;
    { pool.storage(h) } -> std::same_as<std::span<std::uint8_t>>;
    { cpool.max_data_len() } -> std::convertible_to<std::size_t>;
};

/// Fixed-capacity pool of equally sized packet buffers.
///
/// All storage is allocated in the constructor. acquire/release are
/// serialized by an internal mutex; storage(h) only checks the handle, the
/// holder of a live handle owns the bytes exclusively. Generations are 32-bit
/// and wrap; a handle kept across 2^32 reuses of its slot would alias.
class BufferPool {
public:
    /// Throws ConfigError when capacity is 0 or max_data_len exceeds the
    /// addressable stream length.
    BufferPool(std::size_t capacity, std::size_t max_data_len);

    BufferPool(const BufferPool&) = delete;
    BufferPool& operator=(const BufferPool&) = delete;

    [[nodiscard]] Expected<BufferHandle> acquire();
    Status release(BufferHandle h);

    /// Whole max_data_len-byte buffer behind a live handle; empty when stale.
    [[nodiscard]] std::span<std::uint8_t> storage(BufferHandle h);
    [[nodiscard]] std::span<const std::uint8_t> bytes(const PacketBuffer& p);

    [[nodiscard]] bool is_live(BufferHandle h) const;
    [[nodiscard]] std::size_t in_use() const;
    [[nodiscard]] std::size_t capacity() const noexcept { return slots_.size(); }
    [[nodiscard]] std::size_t max_data_len() const noexcept { return max_data_len_; }
    [[nodiscard]] std::uint32_t generation(std::uint32_t slot) const;

private:
    struct Slot {
        std::uint32_t generation = 0;
        bool in_use = false;
    };

    bool live_locked(BufferHandle h) const noexcept;

    mutable std::mutex mutex_;
    std::size_t max_data_len_;
    std::vector<Slot> slots_;
    std::vector<std::uint32_t> free_;
    std::vector<std::uint8_t> storage_;
};

static_assert(PacketPool<BufferPool>);

}  // namespace cspstack
