#include "cspstack/core.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cspstack {

namespace {

template <class T>
T read_unsigned(const nlohmann::json& v, std::string_view key, std::uint64_t max) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError("config key '" + std::string(key) + "' must be a non-negative integer");
    }
    const auto raw = v.get<std::uint64_t>();
    if (raw > max) {
        throw ConfigError("config key '" + std::string(key) + "' out of range");
    }
    return static_cast<T>(raw);
}

}  // namespace

Config parse_config_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }

    Config cfg;
    for (const auto& [key, value] : doc.items()) {
        if (key == "pool_capacity") {
            cfg.pool_capacity = read_unsigned<std::size_t>(value, key, 1u << 16);
        } else if (key == "max_data_len") {
            cfg.max_data_len = read_unsigned<std::size_t>(value, key, kMaxDataLenLimit);
        } else if (key == "rx_slot_count") {
            cfg.rx_slot_count = read_unsigned<std::size_t>(value, key, kMaxRxSlots);
        } else if (key == "reassembly_timeout_ms") {
            cfg.reassembly_timeout_ms = read_unsigned<std::uint32_t>(value, key, UINT32_MAX);
        } else if (key == "queue_depth") {
            cfg.queue_depth = read_unsigned<std::size_t>(value, key, 1u << 16);
        } else if (key == "local_address") {
            cfg.local_address = read_unsigned<std::uint8_t>(value, key, kMaxAddress);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (!cfg.validate()) {
        throw ConfigError("config values out of range (counts must be at least 1)");
    }
    return cfg;
}

Config load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str());
}

Status validate_packet(const CspPacket& p, const Config& cfg) noexcept {
    if (p.length > cfg.max_data_len) {
        return fail(Error::LengthExceedsBuffer);
    }
    if (p.data.size() != p.length) {
        return fail(Error::LengthMismatch);
    }
    return {};
}

Stats& Stats::operator+=(const Stats& o) noexcept {
    rx_delivered += o.rx_delivered;
    rx_dropped_no_begin += o.rx_dropped_no_begin;
    rx_dropped_len += o.rx_dropped_len;
    rx_dropped_overflow += o.rx_dropped_overflow;
    rx_dropped_truncated += o.rx_dropped_truncated;
    rx_dropped_sequence += o.rx_dropped_sequence;
    rx_no_buffer += o.rx_no_buffer;
    rx_preempted += o.rx_preempted;
    rx_timeout += o.rx_timeout;
    rx_addr_mismatch += o.rx_addr_mismatch;
    q_overflow += o.q_overflow;
    port_unbound += o.port_unbound;
    route_not_local += o.route_not_local;
    return *this;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

namespace {

int hex_value(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

// Accepts contiguous pairs ("C0DB") and whitespace-separated bytes ("C0 DB").
Expected<std::vector<std::uint8_t>> parse_hex(std::string_view text) {
    std::vector<std::uint8_t> out;
    int high = -1;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (high >= 0) return fail(Error::ParseError);
            continue;
        }
        const int v = hex_value(c);
        if (v < 0) return fail(Error::ParseError);
        if (high < 0) {
            high = v;
        } else {
            out.push_back(static_cast<std::uint8_t>(high << 4 | v));
            high = -1;
        }
    }
    if (high >= 0) return fail(Error::ParseError);
    return out;
}

}  // namespace cspstack
