#include "cspstack/buffer_pool.hpp"

namespace cspstack {

BufferPool::BufferPool(std::size_t capacity, std::size_t max_data_len)
    : max_data_len_(max_data_len) {
    if (capacity == 0) {
        throw ConfigError("buffer pool capacity must be at least 1");
    }
    if (max_data_len > kMaxDataLenLimit) {
        throw ConfigError("buffer size exceeds the largest fragmentable packet");
    }
    slots_.resize(capacity);
    storage_.resize(capacity * max_data_len);
    free_.reserve(capacity);
    // Hand out slot 0 first.
    for (std::size_t i = capacity; i-- > 0;) {
        free_.push_back(static_cast<std::uint32_t>(i));
    }
}

Expected<BufferHandle> BufferPool::acquire() {
    std::lock_guard lock(mutex_);
    if (free_.empty()) {
        return fail(Error::PoolExhausted);
    }
    const auto index = free_.back();
    free_.pop_back();
    auto& slot = slots_[index];
    slot.in_use = true;
    return BufferHandle{index, slot.generation};
}

Status BufferPool::release(BufferHandle h) {
    std::lock_guard lock(mutex_);
    if (!live_locked(h)) {
        return fail(Error::StaleHandle);
    }
    auto& slot = slots_[h.slot];
    slot.in_use = false;
    ++slot.generation;
    free_.push_back(h.slot);
    return {};
}

std::span<std::uint8_t> BufferPool::storage(BufferHandle h) {
    std::lock_guard lock(mutex_);
    if (!live_locked(h)) {
        return {};
    }
    return std::span<std::uint8_t>(storage_).subspan(std::size_t{h.slot} * max_data_len_,
                                                       max_data_len_);
}

std::span<const std::uint8_t> BufferPool::bytes(const PacketBuffer& p) {
    const auto whole = storage(p.handle);
    return whole.first(std::min<std::size_t>(p.length, whole.size()));
}

bool BufferPool::is_live(BufferHandle h) const {
    std::lock_guard lock(mutex_);
    return live_locked(h);
}

std::size_t BufferPool::in_use() const {
    std::lock_guard lock(mutex_);
    return slots_.size() - free_.size();
}

std::uint32_t BufferPool::generation(std::uint32_t slot) const {
    std::lock_guard lock(mutex_);
    return slot < slots_.size() ? slots_[slot].generation : 0;
}

bool BufferPool::live_locked(BufferHandle h) const noexcept {
    return h.slot < slots_.size() && slots_[h.slot].in_use &&
           slots_[h.slot].generation == h.generation;
}

}  // namespace cspstack
