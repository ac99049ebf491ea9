#include <algorithm>
#include <random>

#include "cspstack/kiss.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cspstack;

namespace {

struct Decoded {
    std::vector<KissEvent> events;
    std::vector<CspPacket> packets;
};

Decoded drain(BufferPool& pool, std::vector<KissEvent> events) {
    Decoded d{std::move(events), {}};
    for (const auto& e : d.events) {
        if (e.kind == KissEvent::Kind::Delivered) {
            d.packets.push_back(CspPacket::make(e.packet.id, pool.bytes(e.packet)));
            (void)pool.release(e.packet.handle);
        }
    }
    return d;
}

}  // namespace

TEST_SUITE("kiss_usart") {

TEST_CASE("encode empty packet") {
    const auto bytes = kiss_encode(CspPacket{});
    CHECK(bytes == std::vector<std::uint8_t>{0xC0, 0x00, 0x00, 0x00, 0x00, 0xC0});
}

TEST_CASE("encode escapes delimiters") {
    const auto bytes = kiss_encode(CspPacket::make({}, std::vector<std::uint8_t>{0x01, 0xC0, 0xDB, 0x02}));
    const std::vector<std::uint8_t> expected{0xC0, 0, 0, 0, 0, 0x01, 0xDB, 0xDC, 0xDB, 0xDD, 0x02, 0xC0};
    CHECK(bytes == expected);
    CHECK(std::count(bytes.begin() + 1, bytes.end() - 1, 0xC0) == 0);
}

TEST_CASE("round trip random packets") {
    BufferPool pool(4, 256);
    KissDecoder dec(pool, 256);
    std::mt19937 rng(21);
    for (int i = 0; i < 2000; ++i) {
        const auto p = testing::random_packet(rng, 256);
        const auto d = drain(pool, dec.push(kiss_encode(p)));
        REQUIRE(d.packets.size() == 1);
        REQUIRE(d.packets[0] == p);
    }
    CHECK(pool.in_use() == 0);
}

TEST_CASE("max length frame") {
    BufferPool pool(2, 256);
    KissDecoder dec(pool, 256);
    const auto p = CspPacket::make({3, 1, 2, 3, 4, 5}, testing::pattern_bytes(256, 0xC0));
    const auto d = drain(pool, dec.push(kiss_encode(p)));
    REQUIRE(d.packets.size() == 1);
    CHECK(d.packets[0] == p);
}

TEST_CASE("back-to-back frames sharing delimiters") {
    BufferPool pool(4, 64);
    KissDecoder dec(pool, 64);
    auto a = kiss_encode(CspPacket::make({}, std::vector<std::uint8_t>{1}));
    const auto b = kiss_encode(CspPacket::make({}, std::vector<std::uint8_t>{2}));
    a.insert(a.end(), b.begin(), b.end());
    const auto d = drain(pool, dec.push(a));
    REQUIRE(d.packets.size() == 2);
    CHECK(d.packets[1].data == std::vector<std::uint8_t>{2});
}

TEST_CASE("empty frame is a runt") {
    BufferPool pool(2, 64);
    KissDecoder dec(pool, 64);
    const auto events = dec.push(std::vector<std::uint8_t>{0xC0, 0xC0});
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == KissEvent::Kind::Dropped);
    CHECK(events[0].reason == KissDrop::Runt);
    CHECK(pool.in_use() == 0);
    CHECK_FALSE(dec.holds_buffer());
}

TEST_CASE("frame shorter than a header is a runt") {
    BufferPool pool(2, 64);
    KissDecoder dec(pool, 64);
    const auto events = dec.push(std::vector<std::uint8_t>{0xC0, 1, 2, 3, 0xC0});
    REQUIRE(events.size() == 1);
    CHECK(events[0].reason == KissDrop::Runt);
    CHECK(pool.in_use() == 0);
}

TEST_CASE("oversize frame is discarded to its end") {
    BufferPool pool(2, 8);
    KissDecoder dec(pool, 8);
    auto bytes = kiss_encode(CspPacket::make({}, testing::pattern_bytes(9)));
    const auto ok = kiss_encode(CspPacket::make({}, testing::pattern_bytes(8)));
    bytes.insert(bytes.end(), ok.begin(), ok.end());
    const auto d = drain(pool, dec.push(bytes));
    REQUIRE(d.events.size() == 2);
    CHECK(d.events[0].reason == KissDrop::Oversize);
    CHECK(d.events[0].kind == KissEvent::Kind::Dropped);
    REQUIRE(d.packets.size() == 1);
    CHECK(d.packets[0].data == testing::pattern_bytes(8));
    CHECK(pool.in_use() == 0);
    CHECK(dec.stats().rx_dropped_len == 1);
}

TEST_CASE("frame start under pool exhaustion, then recovery") {
    BufferPool pool(1, 64);
    KissDecoder dec(pool, 64);
    const auto held = *pool.acquire();
    const auto p = CspPacket::make({1, 2, 3, 4, 5, 6}, testing::pattern_bytes(12));
    const auto frame = kiss_encode(p);

    const auto first = dec.push(frame);
    REQUIRE(first.size() == 1);
    CHECK(first[0].kind == KissEvent::Kind::Dropped);
    CHECK(first[0].reason == KissDrop::NoBuffer);
    CHECK(dec.state() == KissDecoder::State::Idle);
    CHECK(dec.stats().rx_no_buffer == 1);

    REQUIRE(pool.release(held));
    const auto d = drain(pool, dec.push(frame));
    REQUIRE(d.packets.size() == 1);
    CHECK(d.packets[0] == p);
}

TEST_CASE("bytes outside a frame are ignored") {
    BufferPool pool(2, 64);
    KissDecoder dec(pool, 64);
    CHECK(dec.push(std::vector<std::uint8_t>{1, 2, 3, 0xDB, 0xDC}).empty());
    CHECK_FALSE(dec.holds_buffer());
}

TEST_CASE("unknown escape passes the byte through") {
    BufferPool pool(2, 64);
    KissDecoder dec(pool, 64);
    const auto d = drain(pool, dec.push(std::vector<std::uint8_t>{0xC0, 0, 0, 0, 0, 0xDB, 0x41, 0xC0}));
    REQUIRE(d.packets.size() == 1);
    CHECK(d.packets[0].data == std::vector<std::uint8_t>{0x41});
}

TEST_CASE("chunking does not change the event list") {
    std::mt19937 rng(8);
    for (int round = 0; round < 300; ++round) {
        // Mix of valid frames, runts, oversize frames and noise.
        std::vector<std::uint8_t> stream;
        const int pieces = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < pieces; ++i) {
            const auto kind = rng() % 4;
            if (kind == 0) {
                const auto noise = testing::random_bytes(rng, rng() % 12);
                stream.insert(stream.end(), noise.begin(), noise.end());
            } else {
                const auto f = kiss_encode(testing::random_packet(rng, kind == 1 ? 40 : 24));
                stream.insert(stream.end(), f.begin(), f.end());
            }
        }

        std::vector<KissEvent> whole, bytewise, chunked;
        {
            BufferPool pool(3, 32);
            KissDecoder dec(pool, 32);
            dec.push(stream, whole);
            dec.reset();
            CHECK(pool.in_use() == std::count_if(whole.begin(), whole.end(), [](const KissEvent& e) {
                      return e.kind == KissEvent::Kind::Delivered;
                  }));
        }
        {
            BufferPool pool(3, 32);
            KissDecoder dec(pool, 32);
            for (auto b : stream) dec.push(std::span(&b, 1), bytewise);
        }
        {
            BufferPool pool(3, 32);
            KissDecoder dec(pool, 32);
            std::size_t off = 0;
            while (off < stream.size()) {
                const auto n = std::min<std::size_t>(1 + rng() % 7, stream.size() - off);
                dec.push(std::span(stream).subspan(off, n), chunked);
                off += n;
            }
        }
        REQUIRE(whole == bytewise);
        REQUIRE(whole == chunked);
    }
}

TEST_CASE("arbitrary bytes never leak buffers") {
    std::mt19937 rng(99);
    BufferPool pool(2, 32);
    for (int round = 0; round < 500; ++round) {
        KissDecoder dec(pool, 32);
        auto bytes = testing::random_bytes(rng, rng() % 300);
        for (auto& b : bytes) {
            if (rng() % 5 == 0) b = 0xC0;
            if (rng() % 9 == 0) b = 0xDB;
        }
        const auto d = drain(pool, dec.push(bytes));
        dec.reset();
        REQUIRE(pool.in_use() == 0);
    }
}

}
