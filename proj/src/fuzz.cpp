#include "cspstack/fuzz.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <tuple>

namespace cspstack::fuzz {

FrameStream decode_frame_stream(std::span<const std::uint8_t> bytes) {
    FrameStream frames;
    frames.reserve(bytes.size() / kRecordBytes);
    for (std::size_t off = 0; off + kRecordBytes <= bytes.size(); off += kRecordBytes) {
        const auto rec = bytes.subspan(off, kRecordBytes);
        CanFrame f;
        f.ext_id = load_be32(rec.first<4>()) & kCanExtIdMask;
        f.dlc = static_cast<std::uint8_t>(rec[4] % 9);
        std::copy_n(rec.begin() + 5, kCanMaxDlc, f.data.begin());
        frames.push_back(f);
    }
    return frames;
}

std::vector<std::uint8_t> encode_frame_stream(std::span<const CanFrame> frames) {
    std::vector<std::uint8_t> out;
    out.reserve(frames.size() * kRecordBytes);
    for (const auto& f : frames) {
        std::array<std::uint8_t, 4> id{};
        store_be32(f.ext_id, id);
        out.insert(out.end(), id.begin(), id.end());
        out.push_back(f.dlc);
        out.insert(out.end(), f.data.begin(), f.data.end());
    }
    return out;
}

// Deliberately written without the engine's types: raw shifts on the id and
// a std::map of growable byte vectors, one entry per open stream.
ReferenceResult reference_reassemble(std::span<const CanFrame> stream, const Config& cfg) {
    struct Open {
        std::vector<std::uint8_t> bytes;
        std::size_t total = 0;
        unsigned last_remain = 0;
        std::uint32_t header = 0;
    };
    using Key = std::tuple<unsigned, unsigned, unsigned>;

    ReferenceResult result;
    std::map<Key, Open> open;

    for (const auto& f : stream) {
        const std::uint32_t id = f.ext_id & 0x1FFFFFFFu;
        const Key key{id >> 24 & 31u, id >> 19 & 31u, id & 1023u};
        const bool more = (id >> 18 & 1u) == 1u;
        const unsigned remain = id >> 10 & 255u;
        const std::size_t dlc = f.dlc;
        if (dlc > 8) continue;

        if (!more) {
            if (dlc < 6) continue;
            const std::size_t total = std::size_t{f.data[0]} * 256 + f.data[1];
            if (total > cfg.max_data_len || dlc - 6 > total) continue;
            Open s;
            s.total = total;
            s.last_remain = remain;
            s.header = std::uint32_t{f.data[2]} << 24 | std::uint32_t{f.data[3]} << 16 |
                       std::uint32_t{f.data[4]} << 8 | f.data[5];
            s.bytes.assign(f.data.begin() + 6, f.data.begin() + dlc);
            open.erase(key);
            // A single-frame packet still occupies a slot while it is checked.
            result.peak_open_streams = std::max(result.peak_open_streams, open.size() + 1);
            if (remain == 0) {
                if (s.bytes.size() == s.total) {
                    result.packets.push_back(CspPacket::make(decode_csp_header(s.header), s.bytes));
                }
                continue;
            }
            open.emplace(key, std::move(s));
            continue;
        }

        auto it = open.find(key);
        if (it == open.end()) continue;
        Open& s = it->second;
        if (remain + 1 != s.last_remain || s.bytes.size() + dlc > s.total) {
            open.erase(it);
            continue;
        }
        s.bytes.insert(s.bytes.end(), f.data.begin(), f.data.begin() + dlc);
        if (remain == 0) {
            if (s.bytes.size() == s.total) {
                result.packets.push_back(CspPacket::make(decode_csp_header(s.header), s.bytes));
            }
            open.erase(it);
            continue;
        }
        s.last_remain = remain;
    }
    return result;
}

std::size_t histogram_index(const RxOutcome& o) noexcept {
    switch (o.kind) {
        case RxKind::Delivered: return 0;
        case RxKind::Consumed: return 1;
        case RxKind::Dropped: return 2 + static_cast<std::size_t>(o.reason);
    }
    return 1;
}

FuzzReport run_fuzz_case(std::span<const std::uint8_t> bytes, const Config& cfg) {
    const FrameStream stream = decode_frame_stream(bytes);
    FuzzReport report;
    report.frames = stream.size();

    BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
    std::vector<CspPacket> delivered;
    {
        RxEngine engine(pool, cfg);
        for (const auto& frame : stream) {
            const auto outcome = engine.can_rx(frame, 0);
            ++report.outcomes[histogram_index(outcome)];
            if (outcome.kind == RxKind::Delivered) {
                delivered.push_back(CspPacket::make(outcome.packet.id, pool.bytes(outcome.packet)));
                (void)pool.release(outcome.packet.handle);
            }
        }
        engine.poll_timeouts(kForever);
        report.leaked = pool.in_use();
    }
    report.delivered = delivered.size();

    const auto reference = reference_reassemble(stream, cfg);
    const std::size_t capacity = std::min(cfg.rx_slot_count, cfg.pool_capacity);
    if (reference.peak_open_streams <= capacity) {
        report.compared = true;
        report.divergence = reference.packets != delivered;
    }
    return report;
}

void AggregateReport::add(const FuzzReport& r) noexcept {
    ++cases;
    frames += r.frames;
    delivered += r.delivered;
    leaked += r.leaked;
    compared += r.compared ? 1 : 0;
    divergences += r.divergence ? 1 : 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        outcomes[i] += r.outcomes[i];
    }
}

namespace {
constexpr std::array<std::uint8_t, 4> kMagic{'C', 'S', 'P', 'F'};
}

std::vector<std::uint8_t> encode_corpus(std::span<const std::vector<std::uint8_t>> cases) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    for (const auto& c : cases) {
        std::array<std::uint8_t, 4> len{};
        store_be32(static_cast<std::uint32_t>(c.size()), len);
        out.insert(out.end(), len.begin(), len.end());
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

Expected<std::vector<std::vector<std::uint8_t>>> decode_corpus(std::span<const std::uint8_t> file) {
    if (file.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), file.begin())) {
        return fail(Error::CorruptCorpus);
    }
    std::vector<std::vector<std::uint8_t>> cases;
    auto rest = file.subspan(kMagic.size());
    while (!rest.empty()) {
        if (rest.size() < 4) {
            return fail(Error::CorruptCorpus);
        }
        const std::size_t len = load_be32(rest.first<4>());
        rest = rest.subspan(4);
        if (len > rest.size()) {
            return fail(Error::CorruptCorpus);
        }
        cases.emplace_back(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(len));
        rest = rest.subspan(len);
    }
    return cases;
}

Status write_corpus(const std::filesystem::path& path, std::span<const std::vector<std::uint8_t>> cases) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        return fail(Error::IoError);
    }
    const auto bytes = encode_corpus(cases);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        return fail(Error::IoError);
    }
    return {};
}

Expected<std::vector<std::vector<std::uint8_t>>> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return fail(Error::IoError);
    }
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) {
        return fail(Error::IoError);
    }
    return decode_corpus(bytes);
}

Expected<AggregateReport> replay_corpus(const std::filesystem::path& path, const Config& cfg) {
    auto cases = read_corpus(path);
    if (!cases) {
        return fail(cases.error());
    }
    AggregateReport total;
    for (const auto& c : *cases) {
        total.add(run_fuzz_case(c, cfg));
    }
    return total;
}

namespace {

CanFrame begin_frame(std::uint8_t src, std::uint8_t dst, std::uint16_t ident, std::uint8_t remain,
                     std::uint16_t total, const CspId& header, std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, kCanMaxDlc> payload{};
    payload[0] = static_cast<std::uint8_t>(total >> 8);
    payload[1] = static_cast<std::uint8_t>(total);
    store_be32(encode_csp_header(header), std::span(payload).subspan<2, 4>());
    std::copy(data.begin(), data.end(), payload.begin() + kBeginOverhead);
    const CfpId id{src, dst, FragmentKind::Begin, remain, ident};
    return CanFrame::make(cfp_pack(id), std::span(payload).first(kBeginOverhead + data.size()));
}

/// A stream that declares `declared` bytes but carries `carried`.
FrameStream lying_stream(const CspId& header, std::uint16_t ident, std::size_t declared, std::size_t carried) {
    std::vector<std::uint8_t> data(carried);
    for (std::size_t i = 0; i < carried; ++i) data[i] = static_cast<std::uint8_t>(0xA5 ^ i);
    const std::size_t head = std::min(carried, kBeginDataCapacity);
    const std::size_t more = carried <= head ? 0 : (carried - head + kCanMaxDlc - 1) / kCanMaxDlc;

    FrameStream frames;
    frames.push_back(begin_frame(header.source, header.destination, ident, static_cast<std::uint8_t>(more),
                                 static_cast<std::uint16_t>(declared), header,
                                 std::span(data).first(head)));
    std::uint8_t remain = static_cast<std::uint8_t>(more);
    for (std::size_t off = head; off < carried; off += kCanMaxDlc) {
        --remain;
        const CfpId id{header.source, header.destination, FragmentKind::More, remain, ident};
        frames.push_back(CanFrame::make(
            cfp_pack(id), std::span(data).subspan(off, std::min(kCanMaxDlc, carried - off))));
    }
    return frames;
}

std::vector<std::uint8_t> pattern(std::size_t n, std::uint8_t seed) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(seed + i * 7);
    return v;
}

}  // namespace

std::vector<Transcript> regression_transcripts(const Config& cfg) {
    const std::size_t max = std::min(cfg.max_data_len, kMaxDataLenLimit);
    const CspId a{.priority = 2, .source = 3, .destination = cfg.local_address, .dest_port = 10, .source_port = 20, .flags = 0};
    const CspId b{.priority = 1, .source = 4, .destination = cfg.local_address, .dest_port = 11, .source_port = 21, .flags = 0};

    std::vector<Transcript> out;

    // Exact fill to max is delivered; the same stream one byte longer overflows.
    {
        Transcript t{"boundary_fill", {}};
        t.frames = *fragment(CspPacket::make(a, pattern(max, 1)), 1, max);
        const auto over = lying_stream(a, 2, max, max + 1);
        t.frames.insert(t.frames.end(), over.begin(), over.end());
        out.push_back(std::move(t));
    }

    // BEGIN declares one byte more than a buffer holds, then the data follows.
    if (max < kMaxDataLenLimit) {
        out.push_back({"overdeclared_len", lying_stream(a, 3, max + 1, max + 1)});
    } else {
        out.push_back({"overdeclared_len", lying_stream(a, 3, 0xFFFF, max)});
    }

    // Two interleaved streams; with a one-buffer pool the second BEGIN finds
    // no buffer, and a retry after the first delivery succeeds.
    {
        const std::size_t len_a = std::min<std::size_t>(max, 18);
        const std::size_t len_b = std::min<std::size_t>(max, 10);
        const auto sa = *fragment(CspPacket::make(a, pattern(len_a, 0x40)), 4, max);
        const auto sb = *fragment(CspPacket::make(b, pattern(len_b, 0x80)), 5, max);
        Transcript t{"pool_exhaustion", {}};
        t.frames.push_back(sa.front());
        t.frames.insert(t.frames.end(), sb.begin(), sb.end());
        t.frames.insert(t.frames.end(), sa.begin() + 1, sa.end());
        t.frames.insert(t.frames.end(), sb.begin(), sb.end());
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace cspstack::fuzz
