#include <thread>

#include "cspstack/router.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cspstack;

namespace {

PacketBuffer stage(BufferPool& pool, const CspId& id, std::span<const std::uint8_t> data) {
    const auto h = *pool.acquire();
    auto storage = pool.storage(h);
    std::copy(data.begin(), data.end(), storage.begin());
    return PacketBuffer{h, id, static_cast<std::uint16_t>(data.size())};
}

CspId to_local(std::uint8_t port, const Config& cfg) {
    return CspId{2, 9, cfg.local_address, port, 1, 0};
}

}  // namespace

TEST_SUITE("router_core") {

TEST_CASE("bounded fifo") {
    BoundedFifo<int> q(2);
    CHECK(q.push(1));
    CHECK(q.push(2));
    CHECK_FALSE(q.push(3));
    CHECK(*q.pop() == 1);
    CHECK(q.push(3));
    CHECK(*q.pop() == 2);
    CHECK(*q.pop() == 3);
    CHECK_FALSE(q.pop());
}

TEST_CASE("queue accepts depth writes then reports full") {
    Config cfg;
    BufferPool pool(32, 16);
    Router router(pool, cfg);
    for (int i = 0; i < 16; ++i) {
        REQUIRE(router.qfifo_write(stage(pool, to_local(7, cfg), {}), 0));
    }
    const auto extra = stage(pool, to_local(7, cfg), {});
    const auto r = router.qfifo_write(extra, 0);
    REQUIRE_FALSE(r);
    CHECK(r.error() == Error::QueueFull);
    CHECK(router.stats().q_overflow == 1);

    // The writer still owns the rejected buffer and returns it.
    const auto before = pool.in_use();
    REQUIRE(pool.release(extra.handle));
    CHECK(pool.in_use() == before - 1);
    CHECK(router.queued() == 16);
}

TEST_CASE("route to a bound local port") {
    Config cfg;
    BufferPool pool(4, 16);
    Router router(pool, cfg);
    auto sock = router.socket_bind(7);
    REQUIRE(sock);
    const std::vector<std::uint8_t> data{1, 2, 3};
    REQUIRE(router.qfifo_write(stage(pool, to_local(7, cfg), data), 3));
    CHECK(router.route_once() == RouteOutcome{RouteOutcome::Kind::DeliveredToPort, 7});
    CHECK(router.route_once().kind == RouteOutcome::Kind::Empty);

    auto p = router.socket_recv(*sock);
    REQUIRE(p);
    const auto bytes = pool.bytes(*p);
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.end()) == data);
    REQUIRE(pool.release(p->handle));
    CHECK(pool.in_use() == 0);
}

TEST_CASE("packets for another node are dropped") {
    Config cfg;
    BufferPool pool(4, 16);
    Router router(pool, cfg);
    CspId id = to_local(7, cfg);
    id.destination = 20;
    REQUIRE(router.qfifo_write(stage(pool, id, {}), 0));
    CHECK(router.route_once().kind == RouteOutcome::Kind::DroppedNotLocal);
    CHECK(pool.in_use() == 0);
    CHECK(router.stats().route_not_local == 1);
}

TEST_CASE("unbound port drops and releases") {
    Config cfg;
    BufferPool pool(4, 16);
    Router router(pool, cfg);
    REQUIRE(router.qfifo_write(stage(pool, to_local(9, cfg), {}), 0));
    CHECK(router.route_once() == RouteOutcome{RouteOutcome::Kind::DroppedUnbound, 9});
    CHECK(pool.in_use() == 0);
    CHECK(router.stats().port_unbound == 1);
}

TEST_CASE("full socket drops the newest packet") {
    Config cfg;
    cfg.queue_depth = 2;
    BufferPool pool(8, 16);
    Router router(pool, cfg);
    auto sock = *router.socket_bind(5);
    for (std::uint8_t i = 0; i < 3; ++i) {
        const std::vector<std::uint8_t> tag{i};
        REQUIRE(router.qfifo_write(stage(pool, to_local(5, cfg), tag), 0));
        const auto r = router.route_once();
        CHECK(r.kind == (i < 2 ? RouteOutcome::Kind::DeliveredToPort : RouteOutcome::Kind::DroppedUnbound));
    }
    CHECK(router.stats().q_overflow == 1);
    for (std::uint8_t i = 0; i < 2; ++i) {
        auto p = *router.socket_recv(sock);
        CHECK(pool.bytes(p)[0] == i);
        (void)pool.release(p.handle);
    }
    CHECK(pool.in_use() == 0);
}

TEST_CASE("bind and recv errors") {
    Config cfg;
    BufferPool pool(2, 16);
    Router router(pool, cfg);
    auto s = router.socket_bind(7);
    REQUIRE(s);
    const auto again = router.socket_bind(7);
    REQUIRE_FALSE(again);
    CHECK(again.error() == Error::PortInUse);
    CHECK(router.socket_bind(64).error() == Error::InvalidPort);

    const auto empty = router.socket_recv(*s);
    REQUIRE_FALSE(empty);
    CHECK(empty.error() == Error::Empty);

    REQUIRE(router.socket_close(*s));
    CHECK(router.socket_recv(*s).error() == Error::InvalidPort);
    CHECK(router.socket_bind(7));
}

TEST_CASE("closing a socket releases queued packets") {
    Config cfg;
    BufferPool pool(4, 16);
    Router router(pool, cfg);
    auto s = *router.socket_bind(3);
    REQUIRE(router.qfifo_write(stage(pool, to_local(3, cfg), {}), 0));
    REQUIRE(router.route_once().kind == RouteOutcome::Kind::DeliveredToPort);
    CHECK(pool.in_use() == 1);
    REQUIRE(router.socket_close(s));
    CHECK(pool.in_use() == 0);
}

TEST_CASE("csp_send") {
    std::size_t emitted = 0;
    auto count = [&](const CanFrame&) { ++emitted; };
    CHECK(*csp_send(CspPacket{}, count, 0, 256) == 1);
    CHECK(emitted == 1);

    emitted = 0;
    CHECK(*csp_send(CspPacket::make({}, testing::pattern_bytes(256)), count, 0, 256) == 33);
    CHECK(emitted == 33);

    emitted = 0;
    const auto bad = csp_send(CspPacket::make({}, testing::pattern_bytes(257)), count, 0, 256);
    REQUIRE_FALSE(bad);
    CHECK(bad.error() == Error::LengthExceedsBuffer);
    CHECK(emitted == 0);
}

TEST_CASE("end to end: fragment, reassemble, route, receive") {
    Config cfg;
    BufferPool pool(cfg.pool_capacity, cfg.max_data_len);
    RxEngine engine(pool, cfg);
    Router router(pool, cfg);
    auto sock = *router.socket_bind(11);
    const auto p = CspPacket::make(to_local(11, cfg), testing::pattern_bytes(100, 7));

    const auto sent = csp_send(
        p,
        [&](const CanFrame& f) {
            const auto o = engine.can_rx(f, 0);
            if (o.kind == RxKind::Delivered) REQUIRE(router.qfifo_write(o.packet, 1));
        },
        42, cfg.max_data_len);
    REQUIRE(sent);
    CHECK(router.route_once().kind == RouteOutcome::Kind::DeliveredToPort);
    auto got = *router.socket_recv(sock);
    CHECK(got.id == p.id);
    const auto bytes = pool.bytes(got);
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.end()) == p.data);
    (void)pool.release(got.handle);
    CHECK(pool.in_use() == 0);
}

TEST_CASE("every queued packet is delivered or released exactly once") {
    Config cfg;
    cfg.queue_depth = 4;
    BufferPool pool(16, 8);
    Router router(pool, cfg);
    auto sock = *router.socket_bind(1);
    std::mt19937 rng(2);
    std::size_t delivered = 0;
    for (int i = 0; i < 2000; ++i) {
        if (rng() % 2 == 0) {
            auto h = pool.acquire();
            if (h) {
                CspId id = to_local(static_cast<std::uint8_t>(rng() % 3), cfg);
                if (rng() % 5 == 0) id.destination = 30;
                const PacketBuffer pb{*h, id, 0};
                if (!router.qfifo_write(pb, 0)) REQUIRE(pool.release(pb.handle));
            }
        } else if (rng() % 2 == 0) {
            router.route_once();
        } else if (auto p = router.socket_recv(sock)) {
            ++delivered;
            REQUIRE(pool.release(p->handle));
        }
    }
    while (router.route_once().kind != RouteOutcome::Kind::Empty) {
    }
    while (auto p = router.socket_recv(sock)) {
        ++delivered;
        REQUIRE(pool.release(p->handle));
    }
    CHECK(pool.in_use() == 0);
    CHECK(delivered > 0);
}

TEST_CASE("concurrent producers keep per-producer order") {
    Config cfg;
    cfg.queue_depth = 64;
    BufferPool pool(64, 8);
    Router router(pool, cfg);
    auto sock = *router.socket_bind(2);
    constexpr int kProducers = 4;
    constexpr int kPerProducer = 500;

    std::atomic<bool> done{false};
    std::vector<std::vector<int>> seen(kProducers);
    std::thread consumer([&] {
        auto drain = [&] {
            while (auto p = router.socket_recv(sock)) {
                const auto b = pool.bytes(*p);
                seen[b[0]].push_back(b[1] << 8 | b[2]);
                REQUIRE(pool.release(p->handle));
            }
        };
        while (!done.load()) {
            router.route_once();
            drain();
        }
        while (router.route_once().kind != RouteOutcome::Kind::Empty) drain();
        drain();
    });

    std::vector<std::thread> producers;
    for (int t = 0; t < kProducers; ++t) {
        producers.emplace_back([&, t] {
            for (int i = 0; i < kPerProducer;) {
                auto h = pool.acquire();
                if (!h) {
                    std::this_thread::yield();
                    continue;
                }
                auto s = pool.storage(*h);
                s[0] = static_cast<std::uint8_t>(t);
                s[1] = static_cast<std::uint8_t>(i >> 8);
                s[2] = static_cast<std::uint8_t>(i);
                const PacketBuffer pb{*h, to_local(2, cfg), 3};
                if (router.qfifo_write(pb, static_cast<IfaceTag>(t))) {
                    ++i;
                } else {
                    REQUIRE(pool.release(pb.handle));
                    std::this_thread::yield();
                }
            }
        });
    }
    for (auto& p : producers) p.join();
    done = true;
    consumer.join();

    for (const auto& s : seen) {
        CHECK(std::is_sorted(s.begin(), s.end()));
    }
    CHECK(pool.in_use() == 0);
}

}
