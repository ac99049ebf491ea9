#include "cspstack/cfp_can.hpp"

#include <charconv>

namespace cspstack {

Expected<std::vector<CanFrame>> fragment(const CspPacket& p, std::uint16_t identifier,
                                         std::size_t max_data_len) {
    if (p.length > max_data_len || p.length > kMaxDataLenLimit) {
        return fail(Error::LengthExceedsBuffer);
    }
    if (p.data.size() != p.length) {
        return fail(Error::LengthMismatch);
    }

    const std::size_t more_frames =
        p.length <= kBeginDataCapacity ? 0 : (p.length - kBeginDataCapacity + kCanMaxDlc - 1) / kCanMaxDlc;
    CfpId id{
        .source = p.id.source,
        .destination = p.id.destination,
        .kind = FragmentKind::Begin,
        .remain = static_cast<std::uint8_t>(more_frames),
        .identifier = static_cast<std::uint16_t>(identifier & 0x3FFu),
    };

    std::vector<CanFrame> frames;
    frames.reserve(more_frames + 1);

    const std::span<const std::uint8_t> data(p.data);
    std::array<std::uint8_t, kCanMaxDlc> begin{};
    begin[0] = static_cast<std::uint8_t>(p.length >> 8);
    begin[1] = static_cast<std::uint8_t>(p.length);
    store_be32(encode_csp_header(p.id), std::span(begin).subspan<2, 4>());
    const std::size_t head = std::min(p.length, kBeginDataCapacity);
    std::copy_n(data.begin(), head, begin.begin() + kBeginOverhead);
    frames.push_back(CanFrame::make(cfp_pack(id), std::span(begin).first(kBeginOverhead + head)));

    id.kind = FragmentKind::More;
    for (std::size_t offset = head; offset < p.length; offset += kCanMaxDlc) {
        --id.remain;
        const auto chunk = data.subspan(offset, std::min(kCanMaxDlc, p.length - offset));
        frames.push_back(CanFrame::make(cfp_pack(id), chunk));
    }
    return frames;
}

std::string format_frame(const CanFrame& f) {
    static constexpr char kDigits[] = "0123456789ABCDEF";
    std::string out(8, '0');
    for (int i = 0; i < 8; ++i) {
        out[7 - i] = kDigits[(f.ext_id >> (4 * i)) & 0xF];
    }
    out.push_back('#');
    out += to_hex(f.payload());
    return out;
}

Expected<CanFrame> parse_frame(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
        line.remove_suffix(1);
    }
    if (line.size() < 9 || line[8] != '#') {
        return fail(Error::ParseError);
    }
    std::uint32_t id = 0;
    const auto id_text = line.substr(0, 8);
    const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + 8, id, 16);
    if (ec != std::errc{} || ptr != id_text.data() + 8) {
        return fail(Error::ParseError);
    }
    if (id > kCanExtIdMask) {
        return fail(Error::InvalidId);
    }
    const auto payload_text = line.substr(9);
    if (payload_text.find_first_of(" \t") != std::string_view::npos) {
        return fail(Error::ParseError);
    }
    auto payload = parse_hex(payload_text);
    if (!payload || payload->size() > kCanMaxDlc) {
        return fail(Error::ParseError);
    }
    return CanFrame::make(id, *payload);
}

FrameParseResult parse_frame_lines(std::string_view text) {
    FrameParseResult result;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos || line[first] == '#') {
            continue;
        }
        auto frame = parse_frame(line.substr(first));
        if (!frame) {
            result.bad_line = line_no;
            return result;
        }
        result.frames.push_back(*frame);
    }
    return result;
}

}  // namespace cspstack
