#pragma once

#include <array>
#include <atomic>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cspstack/buffer_pool.hpp"
#include "cspstack/cfp_can.hpp"
#include "cspstack/core.hpp"

namespace cspstack {

/// Fixed-capacity ring buffer. Storage is sized once; push never allocates.
/// Not synchronized on its own.
template <class T>
class BoundedFifo {
public:
    explicit BoundedFifo(std::size_t capacity) : items_(capacity) {}

    bool push(const T& item) noexcept {
        if (size_ == items_.size()) return false;
        items_[(head_ + size_) % items_.size()] = item;
        ++size_;
        return true;
    }

    std::optional<T> pop() noexcept {
        if (size_ == 0) return std::nullopt;
        T item = items_[head_];
        head_ = (head_ + 1) % items_.size();
        --size_;
        return item;
    }

    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return items_.size(); }
    bool empty() const noexcept { return size_ == 0; }

private:
    std::vector<T> items_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

using IfaceTag = std::uint8_t;

struct QueuedPacket {
    PacketBuffer packet;
    IfaceTag iface = 0;
};

struct Socket {
    std::uint8_t port = 0;
    std::uint32_t binding = 0;
};

struct RouteOutcome {
    enum class Kind : std::uint8_t { DeliveredToPort, DroppedUnbound, DroppedNotLocal, Empty };

    Kind kind = Kind::Empty;
    std::uint8_t port = 0;

    friend constexpr bool operator==(const RouteOutcome&, const RouteOutcome&) = default;
};

/// Single-hop router: interfaces write into one bounded ingress queue, a
/// single routing context moves packets to the socket bound on their
/// destination port, and any number of readers pull from sockets.
///
/// Buffers travel by handle. A packet that is not delivered to a socket is
/// released back to the pool by the router, except on QueueFull where the
/// writer keeps ownership.
class Router {
public:
    Router(BufferPool& pool, const Config& cfg);
    ~Router();

    Router(const Router&) = delete;
    Router& operator=(const Router&) = delete;

    /// Safe for concurrent producers.
    Status qfifo_write(const PacketBuffer& packet, IfaceTag iface);

    /// Single consumer.
    RouteOutcome route_once();

    Expected<Socket> socket_bind(std::uint8_t port);
    /// Pops the oldest packet; the caller now owns its buffer.
    Expected<PacketBuffer> socket_recv(const Socket& socket);
    /// Unbinds the port and releases anything still queued on it.
    Status socket_close(const Socket& socket);

    std::size_t queued() const;
    Stats stats() const noexcept;

private:
    struct Port {
        mutable std::mutex mutex;
        bool bound = false;
        std::uint32_t binding = 0;
        BoundedFifo<PacketBuffer> fifo;

        explicit Port(std::size_t depth) : fifo(depth) {}
    };

    Port* port_for(const Socket& socket) noexcept;

    BufferPool& pool_;
    std::uint8_t local_address_;
    mutable std::mutex queue_mutex_;
    BoundedFifo<QueuedPacket> queue_;
    std::vector<std::unique_ptr<Port>> ports_;
    std::atomic<std::uint64_t> q_overflow_{0};
    std::atomic<std::uint64_t> port_unbound_{0};
    std::atomic<std::uint64_t> not_local_{0};
};

/// Fragments `p` and hands each frame to `tx` in order. Returns the frame count.
template <std::invocable<const CanFrame&> Tx>
Expected<std::size_t> csp_send(const CspPacket& p, Tx&& tx, std::uint16_t identifier,
                               std::size_t max_data_len) {
    auto frames = fragment(p, identifier, max_data_len);
    if (!frames) {
        return fail(frames.error());
    }
    for (const auto& f : *frames) {
        tx(f);
    }
    return frames->size();
}

}  // namespace cspstack
