#include <gtest/gtest.h>

#include <algorithm>

#include "hometap/flow.hpp"
#include "support.hpp"

using namespace hometap;
using namespace hometap::testing;

TEST(SeparateStreams, SinglePacket) {
    Trace t;
    t.packets.push_back(pkt(0, Direction::Outbound, Transport::TCP, "10.0.0.2", 5000, "52.1.1.1", 443, 60));
    auto set = separate_streams(t);
    ASSERT_EQ(set.streams.size(), 1u);
    EXPECT_EQ(set.streams[0].key, (StreamKey{Ipv4(52, 1, 1, 1), 443, 5000, Transport::TCP}));
}

TEST(SeparateStreams, NatPortsDisambiguateDevices) {
    Trace t;
    t.packets.push_back(pkt(0, Direction::Outbound, Transport::TCP, "10.0.0.1", 5000, "52.1.1.1", 443, 60));
    t.packets.push_back(pkt(1, Direction::Outbound, Transport::TCP, "10.0.0.1", 5001, "52.1.1.1", 443, 60));
    t.packets.push_back(pkt(2, Direction::Inbound, Transport::TCP, "10.0.0.1", 5000, "52.1.1.1", 443, 60));
    auto set = separate_streams(t);
    ASSERT_EQ(set.streams.size(), 2u);
    EXPECT_EQ(set.streams[0].packets.size(), 2u);
    EXPECT_EQ(set.streams[1].packets.size(), 1u);
}

TEST(SeparateStreams, UdpKeyedLikeTcp) {
    Trace t;
    t.packets.push_back(pkt(0, Direction::Outbound, Transport::UDP, "10.0.0.1", 123, "52.94.4.42", 123, 90));
    t.packets.push_back(pkt(0, Direction::Outbound, Transport::TCP, "10.0.0.1", 123, "52.94.4.42", 123, 90));
    EXPECT_EQ(separate_streams(t).streams.size(), 2u);
}

TEST(SeparateStreams, MatchesBruteForceOracle) {
    Gen g(1);
    for (int i = 0; i < 1000; ++i) {
        auto t = random_tagged_trace(g, 100);
        auto set = separate_streams(t);
        auto expected = oracle_group(t);
        ASSERT_EQ(set.streams.size(), expected.size()) << "trace " << i;
        for (std::size_t s = 0; s < expected.size(); ++s) {
            ASSERT_EQ(set.streams[s].key, expected[s].key);
            ASSERT_EQ(set.streams[s].packets, expected[s].packets) << "trace " << i << " stream " << s;
        }
    }
}

TEST(SeparateStreams, PartitionAndDeterminism) {
    Gen g(5);
    for (int i = 0; i < 200; ++i) {
        auto t = random_tagged_trace(g, 100);
        auto set = separate_streams(t);
        std::size_t total = set.unknown_direction;
        for (const auto& s : set.streams) total += s.packets.size();
        EXPECT_EQ(total, t.packets.size());
        auto again = separate_streams(t);
        ASSERT_EQ(again.streams.size(), set.streams.size());
        for (std::size_t s = 0; s < set.streams.size(); ++s) EXPECT_EQ(again.streams[s].packets, set.streams[s].packets);
    }
}

TEST(SeparateStreams, KeysIgnoreEqualTimestampOrder) {
    Gen g(11);
    for (int i = 0; i < 100; ++i) {
        auto t = random_tagged_trace(g, 60);
        auto keys = [](const Trace& tr) {
            std::vector<StreamKey> out;
            for (const auto& s : separate_streams(tr).streams) out.push_back(s.key);
            return out;
        };
        auto before = keys(t);
        // Reverse each run of equal timestamps.
        for (auto it = t.packets.begin(); it != t.packets.end();) {
            auto end = std::find_if(it, t.packets.end(), [&](const auto& p) { return p.ts_us != it->ts_us; });
            std::reverse(it, end);
            it = end;
        }
        EXPECT_EQ(keys(t), before);
    }
}

TEST(StreamStats, Examples) {
    Stream empty;
    EXPECT_EQ(stream_stats(empty), StreamStats{});

    Stream one;
    one.packets.push_back(pkt(3, Direction::Outbound, Transport::TCP, "10.0.0.2", 1, "1.1.1.1", 2, 100));
    auto s1 = stream_stats(one);
    EXPECT_EQ(s1.send_bytes, 100u);
    EXPECT_EQ(s1.recv_bytes, 0u);

    Stream three;
    three.packets.push_back(pkt(1, Direction::Outbound, Transport::TCP, "10.0.0.2", 1, "1.1.1.1", 2, 100));
    three.packets.push_back(pkt(2, Direction::Inbound, Transport::TCP, "10.0.0.2", 1, "1.1.1.1", 2, 200));
    three.packets.push_back(pkt(4, Direction::Outbound, Transport::TCP, "10.0.0.2", 1, "1.1.1.1", 2, 50));
    auto s3 = stream_stats(three);
    EXPECT_EQ(s3.packets, 3u);
    EXPECT_EQ(s3.send_bytes, 150u);
    EXPECT_EQ(s3.recv_bytes, 200u);
    EXPECT_DOUBLE_EQ(s3.first, 1.0);
    EXPECT_DOUBLE_EQ(s3.last, 4.0);
}
