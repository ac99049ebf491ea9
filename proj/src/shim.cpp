#include "cspstack/shim.h"

#include <array>
#include <new>

#include "cspstack/cfp_can.hpp"

namespace cspstack {
namespace {

/// Pool adapter over host-owned buffers. Tokens are tracked in a fixed table
/// so stale or repeated releases never reach the host.
class HostPool {
public:
    HostPool(const csp_shim_host_env_t& env, std::size_t max_data_len) noexcept
        : env_(env), max_data_len_(max_data_len) {}

    Expected<BufferHandle> acquire() {
        for (std::uint32_t i = 0; i < entries_.size(); ++i) {
            auto& e = entries_[i];
            if (e.token != nullptr) continue;
            void* token = env_.acquire_buffer(env_.context);
            if (token == nullptr) {
                return fail(Error::PoolExhausted);
            }
            e.token = token;
            return BufferHandle{i, e.generation};
        }
        return fail(Error::PoolExhausted);
    }

    Status release(BufferHandle h) {
        void* token = detach(h);
        if (token == nullptr) {
            return fail(Error::StaleHandle);
        }
        env_.release_buffer(env_.context, token);
        return {};
    }

    std::span<std::uint8_t> storage(BufferHandle h) {
        if (!live(h)) return {};
        return {static_cast<std::uint8_t*>(entries_[h.slot].token), max_data_len_};
    }

    std::size_t max_data_len() const noexcept { return max_data_len_; }

    /// Forgets a token without releasing it; ownership goes back to the host.
    void* detach(BufferHandle h) noexcept {
        if (!live(h)) return nullptr;
        auto& e = entries_[h.slot];
        void* token = e.token;
        e.token = nullptr;
        ++e.generation;
        return token;
    }

private:
    struct Entry {
        void* token = nullptr;
        std::uint32_t generation = 0;
    };

    bool live(BufferHandle h) const noexcept {
        return h.slot < entries_.size() && entries_[h.slot].token != nullptr &&
               entries_[h.slot].generation == h.generation;
    }

    csp_shim_host_env_t env_;
    std::size_t max_data_len_;
    // One per slot plus one for a BEGIN that arrives while every slot is busy.
    std::array<Entry, kMaxRxSlots + 1> entries_{};
};

static_assert(PacketPool<HostPool>);

struct ShimState {
    ShimState(const csp_shim_host_env_t& host, const Config& cfg) noexcept
        : pool(host, cfg.max_data_len), engine(pool, cfg), env(host) {}

    HostPool pool;
    BasicRxEngine<HostPool> engine;
    csp_shim_host_env_t env;
    Millis now = 0;
};

// Placement storage: no heap, and no destructor running at process exit
// after the host's callbacks may already be gone.
alignas(ShimState) unsigned char g_storage[sizeof(ShimState)];
ShimState* g_state = nullptr;

}  // namespace
}  // namespace cspstack

using cspstack::g_state;

extern "C" int32_t csp_shim_init(const csp_shim_host_env_t* env, const csp_shim_config_t* cfg) {
    if (env == nullptr || cfg == nullptr || env->acquire_buffer == nullptr ||
        env->release_buffer == nullptr || env->enqueue_packet == nullptr) {
        return CSP_SHIM_EINVAL;
    }
    if (g_state != nullptr) {
        return CSP_SHIM_EALREADY;
    }
    cspstack::Config config;
    config.max_data_len = cfg->max_data_len;
    config.rx_slot_count = cfg->rx_slot_count;
    config.reassembly_timeout_ms = cfg->reassembly_timeout_ms;
    if (!config.validate()) {
        return CSP_SHIM_EINVAL;
    }
    g_state = new (cspstack::g_storage) cspstack::ShimState(*env, config);
    return CSP_SHIM_OK;
}

extern "C" int32_t csp_can2_rx(csp_iface_t* /*iface*/, uint32_t id, const uint8_t* data,
                               uint8_t dlc, int* task_woken) {
    using namespace cspstack;
    if (task_woken != nullptr) {
        *task_woken = 0;
    }
    if (g_state == nullptr || dlc > kCanMaxDlc || (data == nullptr && dlc > 0)) {
        return CSP_SHIM_EINVAL;
    }
    const auto frame = CanFrame::make(id & kCanExtIdMask, std::span<const std::uint8_t>(data, dlc));
    const auto outcome = g_state->engine.can_rx(frame, g_state->now);
    switch (outcome.kind) {
        case RxKind::Delivered: {
            void* token = g_state->pool.detach(outcome.packet.handle);
            g_state->env.enqueue_packet(g_state->env.context, token, outcome.packet.length,
                                        encode_csp_header(outcome.packet.id));
            return CSP_SHIM_OK;
        }
        case RxKind::Consumed:
            return CSP_SHIM_OK;
        case RxKind::Dropped:
            return outcome.reason == DropReason::NoBuffer ? CSP_SHIM_ENOBUFS : CSP_SHIM_EDROP;
    }
    return CSP_SHIM_EDROP;
}

extern "C" uint32_t csp_shim_tick(uint64_t now_ms) {
    if (g_state == nullptr) {
        return 0;
    }
    g_state->now = now_ms;
    return static_cast<uint32_t>(g_state->engine.poll_timeouts(now_ms));
}

extern "C" void csp_shim_shutdown(void) {
    if (g_state == nullptr) {
        return;
    }
    g_state->~ShimState();
    g_state = nullptr;
}
