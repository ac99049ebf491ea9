#include "cspstack/kiss.hpp"

#include <algorithm>

namespace cspstack {

namespace {

void put_escaped(std::uint8_t b, std::vector<std::uint8_t>& out) {
    if (b == kiss::FEND) {
        out.push_back(kiss::FESC);
        out.push_back(kiss::TFEND);
    } else if (b == kiss::FESC) {
        out.push_back(kiss::FESC);
        out.push_back(kiss::TFESC);
    } else {
        out.push_back(b);
    }
}

}  // namespace

std::vector<std::uint8_t> kiss_encode(const CspPacket& p) {
    std::vector<std::uint8_t> out;
    out.reserve(2 + 2 * (kHeaderBytes + p.data.size()));
    out.push_back(kiss::FEND);
    std::array<std::uint8_t, kHeaderBytes> header{};
    store_be32(encode_csp_header(p.id), header);
    for (auto b : header) put_escaped(b, out);
    for (auto b : p.data) put_escaped(b, out);
    out.push_back(kiss::FEND);
    return out;
}

KissDecoder::KissDecoder(BufferPool& pool, std::size_t max_data_len) noexcept
    : pool_(pool), max_data_len_(std::min(max_data_len, pool.max_data_len())) {}

KissDecoder::~KissDecoder() { reset(); }

void KissDecoder::reset() noexcept {
    if (current_) {
        (void)pool_.release(*current_);
        current_.reset();
    }
    storage_ = {};
    fill_ = 0;
    state_ = State::Idle;
}

std::vector<KissEvent> KissDecoder::push(std::span<const std::uint8_t> bytes) {
    std::vector<KissEvent> out;
    push(bytes, out);
    return out;
}

void KissDecoder::push(std::span<const std::uint8_t> bytes, std::vector<KissEvent>& out) {
    for (const auto b : bytes) {
        switch (state_) {
            case State::Idle:
                if (b == kiss::FEND) open_frame(out);
                break;
            case State::InFrame:
                if (b == kiss::FEND) {
                    close_frame(out);
                } else if (b == kiss::FESC) {
                    state_ = State::Escaped;
                } else {
                    put(b, out);
                }
                break;
            case State::Escaped:
                if (b == kiss::FEND) {
                    close_frame(out);
                    break;
                }
                state_ = State::InFrame;
                put(b == kiss::TFEND ? kiss::FEND : b == kiss::TFESC ? kiss::FESC : b, out);
                break;
            case State::Discard:
                if (b == kiss::FEND) state_ = State::Idle;
                break;
        }
    }
}

void KissDecoder::open_frame(std::vector<KissEvent>& out) {
    auto handle = pool_.acquire();
    if (!handle) {
        ++stats_.rx_no_buffer;
        state_ = State::Discard;
        out.push_back({KissEvent::Kind::Dropped, KissDrop::NoBuffer, {}});
        return;
    }
    current_ = *handle;
    storage_ = pool_.storage(*handle);
    fill_ = 0;
    state_ = State::InFrame;
}

void KissDecoder::close_frame(std::vector<KissEvent>& out) {
    if (fill_ < kHeaderBytes) {
        drop(KissDrop::Runt, out);
        state_ = State::Idle;
        return;
    }
    const PacketBuffer packet{*current_, decode_csp_header(load_be32(header_)),
                              static_cast<std::uint16_t>(fill_ - kHeaderBytes)};
    current_.reset();
    storage_ = {};
    fill_ = 0;
    state_ = State::Idle;
    ++stats_.rx_delivered;
    out.push_back({KissEvent::Kind::Delivered, KissDrop::NoBuffer, packet});
}

void KissDecoder::put(std::uint8_t byte, std::vector<KissEvent>& out) {
    if (fill_ < kHeaderBytes) {
        header_[fill_++] = byte;
        return;
    }
    const std::size_t offset = fill_ - kHeaderBytes;
    if (offset >= max_data_len_ || offset >= storage_.size()) {
        drop(KissDrop::Oversize, out);
        state_ = State::Discard;
        return;
    }
    storage_[offset] = byte;
    ++fill_;
}

void KissDecoder::drop(KissDrop reason, std::vector<KissEvent>& out) {
    if (reason == KissDrop::Runt) {
        ++stats_.rx_dropped_truncated;
    } else {
        ++stats_.rx_dropped_len;
    }
    if (current_) {
        (void)pool_.release(*current_);
        current_.reset();
    }
    storage_ = {};
    fill_ = 0;
    out.push_back({KissEvent::Kind::Dropped, reason, {}});
}

}  // namespace cspstack
