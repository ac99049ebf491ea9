#include "cspstack/router.hpp"

namespace cspstack {

Router::Router(BufferPool& pool, const Config& cfg)
    : pool_(pool), local_address_(cfg.local_address), queue_(std::max<std::size_t>(cfg.queue_depth, 1)) {
    ports_.reserve(kMaxPort + 1);
    for (std::size_t i = 0; i <= kMaxPort; ++i) {
        ports_.push_back(std::make_unique<Port>(std::max<std::size_t>(cfg.queue_depth, 1)));
    }
}

Router::~Router() {
    while (auto entry = queue_.pop()) {
        (void)pool_.release(entry->packet.handle);
    }
    for (auto& port : ports_) {
        while (auto p = port->fifo.pop()) {
            (void)pool_.release(p->handle);
        }
    }
}

Status Router::qfifo_write(const PacketBuffer& packet, IfaceTag iface) {
    std::lock_guard lock(queue_mutex_);
    if (!queue_.push(QueuedPacket{packet, iface})) {
        q_overflow_.fetch_add(1, std::memory_order_relaxed);
        return fail(Error::QueueFull);
    }
    return {};
}

RouteOutcome Router::route_once() {
    std::optional<QueuedPacket> entry;
    {
        std::lock_guard lock(queue_mutex_);
        entry = queue_.pop();
    }
    if (!entry) {
        return {RouteOutcome::Kind::Empty, 0};
    }

    const auto& packet = entry->packet;
    const std::uint8_t port_no = packet.id.dest_port & kMaxPort;
    if (packet.id.destination != local_address_) {
        (void)pool_.release(packet.handle);
        not_local_.fetch_add(1, std::memory_order_relaxed);
        return {RouteOutcome::Kind::DroppedNotLocal, port_no};
    }

    auto& port = *ports_[port_no];
    {
        std::lock_guard lock(port.mutex);
        if (port.bound && port.fifo.push(packet)) {
            return {RouteOutcome::Kind::DeliveredToPort, port_no};
        }
        if (port.bound) {
            // Full socket: the newest packet is the one dropped.
            q_overflow_.fetch_add(1, std::memory_order_relaxed);
        } else {
            port_unbound_.fetch_add(1, std::memory_order_relaxed);
        }
    }
    (void)pool_.release(packet.handle);
    return {RouteOutcome::Kind::DroppedUnbound, port_no};
}

Expected<Socket> Router::socket_bind(std::uint8_t port_no) {
    if (port_no > kMaxPort) {
        return fail(Error::InvalidPort);
    }
    auto& port = *ports_[port_no];
    std::lock_guard lock(port.mutex);
    if (port.bound) {
        return fail(Error::PortInUse);
    }
    port.bound = true;
    ++port.binding;
    return Socket{port_no, port.binding};
}

Router::Port* Router::port_for(const Socket& socket) noexcept {
    if (socket.port > kMaxPort) return nullptr;
    return ports_[socket.port].get();
}

Expected<PacketBuffer> Router::socket_recv(const Socket& socket) {
    Port* port = port_for(socket);
    if (port == nullptr) {
        return fail(Error::InvalidPort);
    }
    std::lock_guard lock(port->mutex);
    if (!port->bound || port->binding != socket.binding) {
        return fail(Error::InvalidPort);
    }
    auto p = port->fifo.pop();
    if (!p) {
        return fail(Error::Empty);
    }
    return *p;
}

Status Router::socket_close(const Socket& socket) {
    Port* port = port_for(socket);
    if (port == nullptr) {
        return fail(Error::InvalidPort);
    }
    std::lock_guard lock(port->mutex);
    if (!port->bound || port->binding != socket.binding) {
        return fail(Error::InvalidPort);
    }
    while (auto p = port->fifo.pop()) {
        (void)pool_.release(p->handle);
    }
    port->bound = false;
    return {};
}

std::size_t Router::queued() const {
    std::lock_guard lock(queue_mutex_);
    return queue_.size();
}

Stats Router::stats() const noexcept {
    Stats s;
    s.q_overflow = q_overflow_.load(std::memory_order_relaxed);
    s.port_unbound = port_unbound_.load(std::memory_order_relaxed);
    s.route_not_local = not_local_.load(std::memory_order_relaxed);
    return s;
}

}  // namespace cspstack
