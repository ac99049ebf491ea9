#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cspstack/expected.hpp"

namespace cspstack {

inline constexpr std::uint8_t kMaxPriority = 3;
inline constexpr std::uint8_t kMaxAddress = 31;
inline constexpr std::uint8_t kMaxPort = 63;
inline constexpr std::size_t kHeaderBytes = 4;

/// Largest payload a single fragmented stream can describe: the BEGIN frame
/// carries 2 data bytes and each of at most 255 MORE frames carries 8.
inline constexpr std::size_t kMaxDataLenLimit = 2 + 255 * 8;

/// Compile-time cap on concurrent reassembly slots; engines never allocate.
inline constexpr std::size_t kMaxRxSlots = 16;

/// Decoded 32-bit CSP header.
struct CspId {
    std::uint8_t priority = 0;
    std::uint8_t source = 0;
    std::uint8_t destination = 0;
    std::uint8_t dest_port = 0;
    std::uint8_t source_port = 0;
    std::uint8_t flags = 0;

    friend constexpr bool operator==(const CspId&, const CspId&) = default;
};

constexpr bool is_valid(const CspId& id) noexcept {
    return id.priority <= kMaxPriority && id.source <= kMaxAddress &&
           id.destination <= kMaxAddress && id.dest_port <= kMaxPort &&
           id.source_port <= kMaxPort;
}

// Layout, MSB first: pri:2 src:5 dst:5 dport:6 sport:6 flags:8.
constexpr std::uint32_t encode_csp_header(const CspId& id) noexcept {
    return (std::uint32_t{id.priority} & 0x3u) << 30 | (std::uint32_t{id.source} & 0x1Fu) << 25 |
           (std::uint32_t{id.destination} & 0x1Fu) << 20 |
           (std::uint32_t{id.dest_port} & 0x3Fu) << 14 |
           (std::uint32_t{id.source_port} & 0x3Fu) << 8 | std::uint32_t{id.flags};
}

constexpr CspId decode_csp_header(std::uint32_t word) noexcept {
    return CspId{
        .priority = static_cast<std::uint8_t>(word >> 30 & 0x3u),
        .source = static_cast<std::uint8_t>(word >> 25 & 0x1Fu),
        .destination = static_cast<std::uint8_t>(word >> 20 & 0x1Fu),
        .dest_port = static_cast<std::uint8_t>(word >> 14 & 0x3Fu),
        .source_port = static_cast<std::uint8_t>(word >> 8 & 0x3Fu),
        .flags = static_cast<std::uint8_t>(word & 0xFFu),
    };
}

constexpr void store_be32(std::uint32_t v, std::span<std::uint8_t, 4> out) noexcept {
    out[0] = static_cast<std::uint8_t>(v >> 24);
    out[1] = static_cast<std::uint8_t>(v >> 16);
    out[2] = static_cast<std::uint8_t>(v >> 8);
    out[3] = static_cast<std::uint8_t>(v);
}

constexpr std::uint32_t load_be32(std::span<const std::uint8_t, 4> in) noexcept {
    return std::uint32_t{in[0]} << 24 | std::uint32_t{in[1]} << 16 | std::uint32_t{in[2]} << 8 |
           std::uint32_t{in[3]};
}

constexpr std::uint16_t load_be16(std::span<const std::uint8_t, 2> in) noexcept {
    return static_cast<std::uint16_t>(in[0] << 8 | in[1]);
}

/// Owned packet value used at API edges (CLI, tests, transmit). Inside the
/// stack packets live in pool buffers, see PacketBuffer.
struct CspPacket {
    CspId id;
    std::size_t length = 0;
    std::vector<std::uint8_t> data;

    static CspPacket make(const CspId& id, std::span<const std::uint8_t> bytes) {
        return CspPacket{id, bytes.size(), {bytes.begin(), bytes.end()}};
    }

    friend bool operator==(const CspPacket&, const CspPacket&) = default;
};

struct Config {
    std::size_t pool_capacity = 10;
    std::size_t max_data_len = 256;
    std::size_t rx_slot_count = 2;
    std::uint32_t reassembly_timeout_ms = 1000;
    std::size_t queue_depth = 16;
    std::uint8_t local_address = 1;

    constexpr Status validate() const noexcept {
        if (pool_capacity < 1 || rx_slot_count < 1 || rx_slot_count > kMaxRxSlots ||
            queue_depth < 1 || max_data_len > kMaxDataLenLimit || local_address > kMaxAddress) {
            return fail(Error::InvalidConfig);
        }
        return {};
    }

    friend bool operator==(const Config&, const Config&) = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a JSON object with the snake_case Config keys. Missing keys keep
/// their defaults; unknown keys, wrong types and out-of-range values throw.
Config parse_config_json(std::string_view text);
Config load_config_file(const std::filesystem::path& path);

Status validate_packet(const CspPacket& p, const Config& cfg) noexcept;

/// Monotone drop/delivery counters. Each drop path bumps exactly one field.
struct Stats {
    std::uint64_t rx_delivered = 0;
    std::uint64_t rx_dropped_no_begin = 0;
    std::uint64_t rx_dropped_len = 0;
    std::uint64_t rx_dropped_overflow = 0;
    std::uint64_t rx_dropped_truncated = 0;
    std::uint64_t rx_dropped_sequence = 0;
    std::uint64_t rx_no_buffer = 0;
    std::uint64_t rx_preempted = 0;
    std::uint64_t rx_timeout = 0;
    std::uint64_t rx_addr_mismatch = 0;
    std::uint64_t q_overflow = 0;
    std::uint64_t port_unbound = 0;
    std::uint64_t route_not_local = 0;

    Stats& operator+=(const Stats& o) noexcept;
    friend bool operator==(const Stats&, const Stats&) = default;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
Expected<std::vector<std::uint8_t>> parse_hex(std::string_view text);

}  // namespace cspstack
