#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cspstack/cfp_can.hpp"
#include "cspstack/core.hpp"

namespace cspstack::fuzz {

/// Bytes per raw frame record: 4-byte big-endian id, dlc byte, 8 data bytes.
inline constexpr std::size_t kRecordBytes = 13;

using FrameStream = std::vector<CanFrame>;

/// Total over arbitrary input: ids are masked to 29 bits, dlc is taken mod 9
/// and a trailing partial record is ignored.
FrameStream decode_frame_stream(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_frame_stream(std::span<const CanFrame> frames);

struct ReferenceResult {
    std::vector<CspPacket> packets;
    /// Largest number of streams open at once. The bounded engine only has
    /// to agree with the reference while this stays within its capacity.
    std::size_t peak_open_streams = 0;
};

/// Unbounded, map-backed reassembler with the same acceptance rules as the
/// engine. Test oracle only.
ReferenceResult reference_reassemble(std::span<const CanFrame> stream, const Config& cfg);

/// Outcome counts, indexed Delivered, Consumed, then one per DropReason.
using OutcomeHistogram = std::array<std::uint64_t, 2 + kDropReasonCount>;

std::size_t histogram_index(const RxOutcome& o) noexcept;

struct FuzzReport {
    std::uint64_t frames = 0;
    std::uint64_t delivered = 0;
    OutcomeHistogram outcomes{};
    std::uint64_t leaked = 0;
    bool compared = false;
    bool divergence = false;

    friend bool operator==(const FuzzReport&, const FuzzReport&) = default;
};

/// Drives a fresh pool and engine with the decoded stream, flushes pending
/// streams, releases delivered buffers and checks against the reference.
FuzzReport run_fuzz_case(std::span<const std::uint8_t> bytes, const Config& cfg);

struct AggregateReport {
    std::uint64_t cases = 0;
    std::uint64_t frames = 0;
    std::uint64_t delivered = 0;
    std::uint64_t leaked = 0;
    std::uint64_t compared = 0;
    std::uint64_t divergences = 0;
    OutcomeHistogram outcomes{};

    void add(const FuzzReport& r) noexcept;
    bool ok() const noexcept { return leaked == 0 && divergences == 0; }

    friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

/// Corpus file: magic "CSPF", then records of [u32 big-endian length][bytes].
std::vector<std::uint8_t> encode_corpus(std::span<const std::vector<std::uint8_t>> cases);
Expected<std::vector<std::vector<std::uint8_t>>> decode_corpus(std::span<const std::uint8_t> file);

Status write_corpus(const std::filesystem::path& path, std::span<const std::vector<std::uint8_t>> cases);
Expected<std::vector<std::vector<std::uint8_t>>> read_corpus(const std::filesystem::path& path);
Expected<AggregateReport> replay_corpus(const std::filesystem::path& path, const Config& cfg);

struct Transcript {
    std::string name;
    FrameStream frames;
};

/// The three named regression streams for the given buffer size:
/// boundary_fill, overdeclared_len and pool_exhaustion.
std::vector<Transcript> regression_transcripts(const Config& cfg);

}  // namespace cspstack::fuzz
