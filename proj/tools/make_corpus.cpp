// Regenerates the shipped regression corpus and frame transcripts.
//
//   make_corpus <output-dir>
//
// Writes <dir>/corpus/<name>.cspf (one case each), <dir>/corpus/regressions.cspf
// (all three) and <dir>/transcripts/<name>.frames in the text frame format.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "cspstack/cfp_can.hpp"
#include "cspstack/fuzz.hpp"

namespace fs = std::filesystem;
using namespace cspstack;

namespace {

bool write_frames(const fs::path& path, const std::string& title, std::span<const CanFrame> frames) {
    std::ofstream out(path);
    out << "# " << title << '\n';
    for (const auto& f : frames) {
        out << format_frame(f) << '\n';
    }
    return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_corpus <output-dir>\n";
        return 2;
    }
    const fs::path root = argv[1];
    fs::create_directories(root / "corpus");
    fs::create_directories(root / "transcripts");

    const Config cfg{};
    std::vector<std::vector<std::uint8_t>> all;
    for (const auto& t : fuzz::regression_transcripts(cfg)) {
        auto bytes = fuzz::encode_frame_stream(t.frames);
        const std::vector<std::vector<std::uint8_t>> one{bytes};
        if (!fuzz::write_corpus(root / "corpus" / (t.name + ".cspf"), one) ||
            !write_frames(root / "transcripts" / (t.name + ".frames"), t.name, t.frames)) {
            std::cerr << "make_corpus: cannot write " << t.name << '\n';
            return 1;
        }
        all.push_back(std::move(bytes));
    }
    if (!fuzz::write_corpus(root / "corpus" / "regressions.cspf", all)) {
        std::cerr << "make_corpus: cannot write regressions.cspf\n";
        return 1;
    }

    // Plain round-trip transcripts for golden comparisons.
    const CspId id{.priority = 2, .source = 5, .destination = 1, .dest_port = 7, .source_port = 12, .flags = 0};
    const std::vector<std::uint8_t> two{0xC0, 0xDB};
    write_frames(root / "transcripts" / "single_frame.frames", "single_frame",
                 *fragment(CspPacket::make(id, two), 9, cfg.max_data_len));
    write_frames(root / "transcripts" / "empty_packet.frames", "empty_packet",
                 *fragment(CspPacket::make(id, {}), 10, cfg.max_data_len));
    std::vector<std::uint8_t> full(cfg.max_data_len);
    for (std::size_t i = 0; i < full.size(); ++i) full[i] = static_cast<std::uint8_t>(i);
    write_frames(root / "transcripts" / "max_length.frames", "max_length",
                 *fragment(CspPacket::make(id, full), 11, cfg.max_data_len));
    return 0;
}
