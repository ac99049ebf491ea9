#include "cspstack/cli.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cspstack/buffer_pool.hpp"
#include "cspstack/cfp_can.hpp"
#include "cspstack/fuzz.hpp"
#include "cspstack/router.hpp"

namespace cspstack::cli {

namespace {

std::optional<std::uint32_t> parse_hex_word(const std::string& text) {
    if (text.size() != 8) return std::nullopt;
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

std::string hex_word(std::uint32_t v) {
    std::array<std::uint8_t, 4> b{};
    store_be32(v, b);
    return to_hex(b);
}

void print_packet(std::ostream& out, const CspId& id, std::span<const std::uint8_t> data) {
    out << "header=" << hex_word(encode_csp_header(id)) << " len=" << data.size()
        << " data=" << to_hex(data) << '\n';
}

std::string flags_text(std::uint8_t flags) {
    static constexpr char kDigits[] = "0123456789ABCDEF";
    return std::string("0x") + kDigits[flags >> 4] + kDigits[flags & 0xF];
}

struct Options {
    std::string config_path;

    std::string inspect_cfp;
    std::string inspect_header;

    unsigned pri = 0, src = 0, dst = 0, dport = 0, sport = 0, flags = 0, ident = 0;
    std::string data_hex;

    std::string frames_in;
    std::string corpus;
    unsigned port = 0;
};

int do_inspect(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.inspect_cfp.empty() == o.inspect_header.empty()) {
        err << "inspect: give exactly one of --cfp or --header\n";
        return kExitUsage;
    }
    if (!o.inspect_cfp.empty()) {
        const auto word = parse_hex_word(o.inspect_cfp);
        if (!word) {
            err << "inspect: --cfp expects 8 hex digits\n";
            return kExitUsage;
        }
        const auto id = cfp_unpack(*word);
        if (!id) {
            err << "inspect: " << to_string(id.error()) << ": id exceeds 29 bits\n";
            return kExitProtocol;
        }
        out << "source=" << unsigned{id->source} << '\n'
            << "destination=" << unsigned{id->destination} << '\n'
            << "kind=" << (id->kind == FragmentKind::Begin ? "BEGIN" : "MORE") << '\n'
            << "remain=" << unsigned{id->remain} << '\n'
            << "identifier=" << id->identifier << '\n';
        return kExitOk;
    }
    const auto word = parse_hex_word(o.inspect_header);
    if (!word) {
        err << "inspect: --header expects 8 hex digits\n";
        return kExitUsage;
    }
    const auto id = decode_csp_header(*word);
    out << "priority=" << unsigned{id.priority} << '\n'
        << "source=" << unsigned{id.source} << '\n'
        << "destination=" << unsigned{id.destination} << '\n'
        << "dest_port=" << unsigned{id.dest_port} << '\n'
        << "source_port=" << unsigned{id.source_port} << '\n'
        << "flags=" << flags_text(id.flags) << '\n';
    return kExitOk;
}

std::optional<CspPacket> packet_from(const Options& o, std::ostream& err) {
    auto data = parse_hex(o.data_hex);
    if (!data) {
        err << "--data-hex is not valid hex\n";
        return std::nullopt;
    }
    const CspId id{
        .priority = static_cast<std::uint8_t>(o.pri),
        .source = static_cast<std::uint8_t>(o.src),
        .destination = static_cast<std::uint8_t>(o.dst),
        .dest_port = static_cast<std::uint8_t>(o.dport),
        .source_port = static_cast<std::uint8_t>(o.sport),
        .flags = static_cast<std::uint8_t>(o.flags),
    };
    return CspPacket::make(id, *data);
}

int do_fragment(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    auto packet = packet_from(o, err);
    if (!packet) return kExitUsage;
    auto frames = fragment(*packet, static_cast<std::uint16_t>(o.ident), cfg.max_data_len);
    if (!frames) {
        err << "fragment: " << to_string(frames.error()) << " (length " << packet->length
            << ", max " << cfg.max_data_len << ")\n";
        return kExitProtocol;
    }
    for (const auto& f : *frames) {
        out << format_frame(f) << '\n';
    }
    return kExitOk;
}

int do_reassemble(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    std::ifstream in(o.frames_in, std::ios::binary);
    if (!in) {
        err << "reassemble: cannot open " << o.frames_in << '\n';
        return kExitProtocol;
    }
    std::ostringstream text;
    text << in.rdbuf();
    const auto parsed = parse_frame_lines(text.str());
    if (parsed.bad_line != 0) {
        err << "reassemble: " << o.frames_in << ":" << parsed.bad_line << ": malformed frame\n";
        return kExitProtocol;
    }

    BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
    RxEngine engine(pool, cfg);
    std::size_t dropped = 0;
    for (const auto& frame : parsed.frames) {
        const auto outcome = engine.can_rx(frame, 0);
        if (outcome.kind == RxKind::Delivered) {
            print_packet(out, outcome.packet.id, pool.bytes(outcome.packet));
            (void)pool.release(outcome.packet.handle);
        } else if (outcome.kind == RxKind::Dropped) {
            ++dropped;
        }
    }
    dropped += engine.poll_timeouts(kForever);
    if (dropped != 0) {
        err << "reassemble: " << dropped << " frame(s) or stream(s) dropped\n";
        return kExitProtocol;
    }
    return kExitOk;
}

int do_fuzz_replay(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    const auto report = fuzz::replay_corpus(o.corpus, cfg);
    if (!report) {
        err << "fuzz-replay: " << to_string(report.error()) << ": " << o.corpus << '\n';
        return kExitProtocol;
    }
    out << "cases=" << report->cases << '\n'
        << "frames=" << report->frames << '\n'
        << "delivered=" << report->delivered << '\n'
        << "compared=" << report->compared << '\n'
        << "divergences=" << report->divergences << '\n'
        << "leaked=" << report->leaked << '\n';
    out << "outcome.Delivered=" << report->outcomes[0] << '\n'
        << "outcome.Consumed=" << report->outcomes[1] << '\n';
    for (std::size_t r = 0; r < kDropReasonCount; ++r) {
        out << "outcome.Dropped." << to_string(static_cast<DropReason>(r)) << '='
            << report->outcomes[2 + r] << '\n';
    }
    return report->ok() ? kExitOk : kExitProtocol;
}

int do_loopback(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    auto data = parse_hex(o.data_hex);
    if (!data) {
        err << "loopback: --data-hex is not valid hex\n";
        return kExitUsage;
    }
    const CspId id{.priority = 2,
                   .source = cfg.local_address,
                   .destination = cfg.local_address,
                   .dest_port = static_cast<std::uint8_t>(o.port),
                   .source_port = 0,
                   .flags = 0};
    const auto packet = CspPacket::make(id, *data);

    BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
    RxEngine engine(pool, cfg);
    Router router(pool, cfg);
    auto socket = router.socket_bind(id.dest_port);
    if (!socket) {
        err << "loopback: " << to_string(socket.error()) << '\n';
        return kExitProtocol;
    }

    int status = kExitOk;
    auto sent = csp_send(
        packet,
        [&](const CanFrame& frame) {
            const auto outcome = engine.can_rx(frame, 0);
            if (outcome.kind == RxKind::Delivered && !router.qfifo_write(outcome.packet, 0)) {
                (void)pool.release(outcome.packet.handle);
            } else if (outcome.kind == RxKind::Dropped) {
                err << "loopback: frame dropped: " << to_string(outcome.reason) << '\n';
                status = kExitProtocol;
            }
        },
        0, cfg.max_data_len);
    if (!sent) {
        err << "loopback: " << to_string(sent.error()) << '\n';
        return kExitProtocol;
    }
    while (router.route_once().kind != RouteOutcome::Kind::Empty) {
    }
    auto received = router.socket_recv(*socket);
    if (!received) {
        err << "loopback: nothing received on port " << o.port << '\n';
        return kExitProtocol;
    }
    print_packet(out, received->id, pool.bytes(*received));
    (void)pool.release(received->handle);
    return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CSP packet stack inspection, conversion and replay tool", "cspstack"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);

    auto* inspect = app.add_subcommand("inspect", "Decode a CFP id or CSP header word");
    auto* cfp_opt = inspect->add_option("--cfp", o.inspect_cfp, "29-bit CAN id as 8 hex digits");
    auto* hdr_opt = inspect->add_option("--header", o.inspect_header, "CSP header as 8 hex digits");
    cfp_opt->excludes(hdr_opt);

    auto* frag = app.add_subcommand("fragment", "Split a packet into CAN frames");
    frag->add_option("--pri", o.pri)->check(CLI::Range(0, 3));
    frag->add_option("--src", o.src)->check(CLI::Range(0, 31));
    frag->add_option("--dst", o.dst)->check(CLI::Range(0, 31));
    frag->add_option("--dport", o.dport)->check(CLI::Range(0, 63));
    frag->add_option("--sport", o.sport)->check(CLI::Range(0, 63));
    frag->add_option("--flags", o.flags)->check(CLI::Range(0, 255));
    frag->add_option("--data-hex", o.data_hex, "payload bytes as hex");
    frag->add_option("--ident", o.ident, "10-bit stream identifier")->check(CLI::Range(0, 1023));

    auto* reasm = app.add_subcommand("reassemble", "Reassemble packets from a frames file");
    reasm->add_option("--in", o.frames_in, "frames file, one IIIIIIII#DD.. per line")->required();

    auto* replay = app.add_subcommand("fuzz-replay", "Replay a CSPF corpus through the fuzz harness");
    replay->add_option("corpus", o.corpus)->required();

    auto* loop = app.add_subcommand("loopback", "Send a packet through CAN, router and socket");
    loop->add_option("--data-hex", o.data_hex, "payload bytes as hex");
    loop->add_option("--port", o.port, "destination port")->required()->check(CLI::Range(0, 63));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    Config cfg;
    if (!o.config_path.empty()) {
        try {
            cfg = load_config_file(o.config_path);
        } catch (const ConfigError& e) {
            err << e.what() << '\n';
            return kExitUsage;
        }
    }

    if (inspect->parsed()) return do_inspect(o, out, err);
    if (frag->parsed()) return do_fragment(o, cfg, out, err);
    if (reasm->parsed()) return do_reassemble(o, cfg, out, err);
    if (replay->parsed()) return do_fuzz_replay(o, cfg, out, err);
    if (loop->parsed()) return do_loopback(o, cfg, out, err);
    return kExitUsage;
}

}  // namespace cspstack::cli
