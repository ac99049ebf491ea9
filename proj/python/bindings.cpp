#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cspstack/buffer_pool.hpp"
#include "cspstack/cfp_can.hpp"
#include "cspstack/cli.hpp"
#include "cspstack/core.hpp"
#include "cspstack/fuzz.hpp"
#include "cspstack/kiss.hpp"

namespace py = pybind11;
using namespace cspstack;

namespace {

std::vector<std::uint8_t> to_vector(const py::bytes& b) {
    const std::string_view s = b;
    return {s.begin(), s.end()};
}

py::bytes to_bytes(std::span<const std::uint8_t> s) {
    return {reinterpret_cast<const char*>(s.data()), s.size()};
}

template <typename T>
T value_or_throw(Expected<T> e) {
    if (!e) throw py::value_error(std::string(to_string(e.error())));
    return std::move(*e);
}

py::dict stats_dict(const Stats& s) {
    py::dict d;
    d["rx_delivered"] = s.rx_delivered;
    d["rx_dropped_no_begin"] = s.rx_dropped_no_begin;
    d["rx_dropped_len"] = s.rx_dropped_len;
    d["rx_dropped_overflow"] = s.rx_dropped_overflow;
    d["rx_dropped_truncated"] = s.rx_dropped_truncated;
    d["rx_dropped_sequence"] = s.rx_dropped_sequence;
    d["rx_no_buffer"] = s.rx_no_buffer;
    d["rx_preempted"] = s.rx_preempted;
    d["rx_timeout"] = s.rx_timeout;
    d["rx_addr_mismatch"] = s.rx_addr_mismatch;
    d["q_overflow"] = s.q_overflow;
    d["port_unbound"] = s.port_unbound;
    d["route_not_local"] = s.route_not_local;
    return d;
}

py::dict histogram_dict(const fuzz::OutcomeHistogram& h) {
    py::dict d;
    d["Delivered"] = h[0];
    d["Consumed"] = h[1];
    for (std::size_t r = 0; r < kDropReasonCount; ++r) {
        d[py::str(std::string(to_string(static_cast<DropReason>(r))))] = h[2 + r];
    }
    return d;
}

using FrameTuple = std::pair<std::uint32_t, py::bytes>;

CanFrame frame_from(const FrameTuple& t) {
    const auto data = to_vector(t.second);
    if (data.size() > kCanMaxDlc) throw py::value_error("CAN payload longer than 8 bytes");
    if (t.first > kCanExtIdMask) throw py::value_error("CAN id exceeds 29 bits");
    return CanFrame::make(t.first, data);
}

}  // namespace

PYBIND11_MODULE(cspstack, m) {
    m.doc() = "CSP packet stack: header and CFP codecs, CAN fragmentation and reassembly, KISS framing";

    py::class_<CspId>(m, "CspId")
        .def(py::init([](unsigned priority, unsigned source, unsigned destination, unsigned dest_port,
                         unsigned source_port, unsigned flags) {
                 const CspId id{static_cast<std::uint8_t>(priority), static_cast<std::uint8_t>(source),
                                static_cast<std::uint8_t>(destination), static_cast<std::uint8_t>(dest_port),
                                static_cast<std::uint8_t>(source_port), static_cast<std::uint8_t>(flags)};
                 if (priority > 255 || source > 255 || destination > 255 || dest_port > 255 ||
                     source_port > 255 || flags > 255 || !is_valid(id)) {
                     throw py::value_error("CSP id field out of range");
                 }
                 return id;
             }),
             py::arg("priority") = 0, py::arg("source") = 0, py::arg("destination") = 0,
             py::arg("dest_port") = 0, py::arg("source_port") = 0, py::arg("flags") = 0)
        .def_readonly("priority", &CspId::priority)
        .def_readonly("source", &CspId::source)
        .def_readonly("destination", &CspId::destination)
        .def_readonly("dest_port", &CspId::dest_port)
        .def_readonly("source_port", &CspId::source_port)
        .def_readonly("flags", &CspId::flags)
        .def(py::self == py::self)
        .def("__repr__", [](const CspId& id) {
            std::ostringstream s;
            s << "CspId(priority=" << unsigned{id.priority} << ", source=" << unsigned{id.source}
              << ", destination=" << unsigned{id.destination} << ", dest_port=" << unsigned{id.dest_port}
              << ", source_port=" << unsigned{id.source_port} << ", flags=" << unsigned{id.flags} << ")";
            return s.str();
        });

    m.def("encode_header", &encode_csp_header, py::arg("id"), "Pack a CspId into its 32-bit header word.");
    m.def("decode_header", &decode_csp_header, py::arg("word"));

    py::enum_<FragmentKind>(m, "FragmentKind")
        .value("BEGIN", FragmentKind::Begin)
        .value("MORE", FragmentKind::More);

    py::class_<CfpId>(m, "CfpId")
        .def(py::init([](unsigned source, unsigned destination, FragmentKind kind, unsigned remain,
                         unsigned identifier) {
                 if (source > 31 || destination > 31 || remain > 255 || identifier > 1023) {
                     throw py::value_error("CFP id field out of range");
                 }
                 return CfpId{static_cast<std::uint8_t>(source), static_cast<std::uint8_t>(destination), kind,
                              static_cast<std::uint8_t>(remain), static_cast<std::uint16_t>(identifier)};
             }),
             py::arg("source") = 0, py::arg("destination") = 0, py::arg("kind") = FragmentKind::Begin,
             py::arg("remain") = 0, py::arg("identifier") = 0)
        .def_readonly("source", &CfpId::source)
        .def_readonly("destination", &CfpId::destination)
        .def_readonly("kind", &CfpId::kind)
        .def_readonly("remain", &CfpId::remain)
        .def_readonly("identifier", &CfpId::identifier)
        .def(py::self == py::self);

    m.def("cfp_pack", &cfp_pack, py::arg("id"));
    m.def("cfp_unpack", [](std::uint32_t word) { return value_or_throw(cfp_unpack(word)); }, py::arg("word"),
          "Split a 29-bit CAN id; raises ValueError for wider values.");

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("from_json", &parse_config_json, py::arg("text"))
        .def_readwrite("pool_capacity", &Config::pool_capacity)
        .def_readwrite("max_data_len", &Config::max_data_len)
        .def_readwrite("rx_slot_count", &Config::rx_slot_count)
        .def_readwrite("reassembly_timeout_ms", &Config::reassembly_timeout_ms)
        .def_readwrite("queue_depth", &Config::queue_depth)
        .def_readwrite("local_address", &Config::local_address)
        .def("validate", [](const Config& c) { return static_cast<bool>(c.validate()); });
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "fragment",
        [](const CspId& id, const py::bytes& data, unsigned identifier, std::size_t max_data_len) {
            const auto frames = value_or_throw(fragment(CspPacket::make(id, to_vector(data)),
                                                        static_cast<std::uint16_t>(identifier & 0x3FFu),
                                                        max_data_len));
            std::vector<FrameTuple> out;
            for (const auto& f : frames) out.emplace_back(f.ext_id, to_bytes(f.payload()));
            return out;
        },
        py::arg("id"), py::arg("data"), py::arg("identifier") = 0, py::arg("max_data_len") = 256,
        "Split a packet into (can_id, payload) frames.");

    m.def(
        "reassemble",
        [](const std::vector<FrameTuple>& frames, const Config& cfg) {
            std::vector<CanFrame> parsed;
            for (const auto& t : frames) parsed.push_back(frame_from(t));
            if (!cfg.validate()) throw py::value_error("invalid config");
            BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
            RxEngine engine(pool, cfg);
            py::list packets;
            for (const auto& f : parsed) {
                const auto o = engine.can_rx(f, 0);
                if (o.kind == RxKind::Delivered) {
                    packets.append(py::make_tuple(o.packet.id, to_bytes(pool.bytes(o.packet))));
                    (void)pool.release(o.packet.handle);
                }
            }
            engine.poll_timeouts(kForever);
            return py::make_tuple(packets, stats_dict(engine.stats()));
        },
        py::arg("frames"), py::arg("config") = Config{},
        "Feed (can_id, payload) frames through a fresh engine. Returns (packets, stats).");

    m.def(
        "kiss_encode",
        [](const CspId& id, const py::bytes& data) { return to_bytes(kiss_encode(CspPacket::make(id, to_vector(data)))); },
        py::arg("id"), py::arg("data"));

    m.def(
        "kiss_decode",
        [](const py::bytes& stream, const Config& cfg) {
            BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
            py::list packets;
            py::list drops;
            KissDecoder dec(pool, cfg.max_data_len);
            for (const auto& ev : dec.push(to_vector(stream))) {
                if (ev.kind == KissEvent::Kind::Delivered) {
                    packets.append(py::make_tuple(ev.packet.id, to_bytes(pool.bytes(ev.packet))));
                    (void)pool.release(ev.packet.handle);
                } else {
                    drops.append(std::string(to_string(ev.reason)));
                }
            }
            return py::make_tuple(packets, drops);
        },
        py::arg("stream"), py::arg("config") = Config{},
        "Deframe a KISS byte stream. Returns (packets, drop reasons).");

    m.def(
        "run_fuzz_case",
        [](const py::bytes& data, const Config& cfg) {
            const auto r = fuzz::run_fuzz_case(to_vector(data), cfg);
            py::dict d;
            d["frames"] = r.frames;
            d["delivered"] = r.delivered;
            d["leaked"] = r.leaked;
            d["compared"] = r.compared;
            d["divergence"] = r.divergence;
            d["outcomes"] = histogram_dict(r.outcomes);
            return d;
        },
        py::arg("data"), py::arg("config") = Config{});

    m.def(
        "replay_corpus",
        [](const std::filesystem::path& path, const Config& cfg) {
            const auto r = value_or_throw(fuzz::replay_corpus(path, cfg));
            py::dict d;
            d["cases"] = r.cases;
            d["frames"] = r.frames;
            d["delivered"] = r.delivered;
            d["leaked"] = r.leaked;
            d["compared"] = r.compared;
            d["divergences"] = r.divergences;
            d["outcomes"] = histogram_dict(r.outcomes);
            return d;
        },
        py::arg("path"), py::arg("config") = Config{});

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run one command-line invocation. Returns (exit_code, stdout, stderr).");
}
