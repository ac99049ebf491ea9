#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cspstack/core.hpp"

namespace cspstack::testing {

inline CspId random_id(std::mt19937& rng) {
    auto pick = [&](unsigned max) { return static_cast<std::uint8_t>(std::uniform_int_distribution<unsigned>(0, max)(rng)); };
    return CspId{pick(3), pick(31), pick(31), pick(63), pick(63), pick(255)};
}

inline std::vector<std::uint8_t> random_bytes(std::mt19937& rng, std::size_t n) {
    std::vector<std::uint8_t> v(n);
    std::uniform_int_distribution<unsigned> byte(0, 255);
    for (auto& b : v) b = static_cast<std::uint8_t>(byte(rng));
    return v;
}

inline CspPacket random_packet(std::mt19937& rng, std::size_t max_len) {
    const auto len = std::uniform_int_distribution<std::size_t>(0, max_len)(rng);
    return CspPacket::make(random_id(rng), random_bytes(rng, len));
}

inline std::vector<std::uint8_t> pattern_bytes(std::size_t n, std::uint8_t seed = 0) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(seed + i);
    return v;
}

}  // namespace cspstack::testing
