#include <gtest/gtest.h>

#include <cmath>

#include "hometap/rates.hpp"
#include "support.hpp"

using namespace hometap;
using namespace hometap::testing;

namespace {

RateSeries series_of(std::vector<double> send, double start = 0.0) {
    RateSeries s;
    s.start_us = seconds_to_micros(start);
    s.recv_rate.assign(send.size(), 0.0);
    s.send_rate = std::move(send);
    return s;
}

std::vector<std::size_t> event_bins(const RateSeries& s, const std::vector<Event>& events) {
    std::vector<std::size_t> out;
    for (const auto& e : events) out.push_back(static_cast<std::size_t>(std::floor((e.time - s.start()) / s.window())));
    return out;
}

}  // namespace

TEST(RateSeries, ThreePacketsOneBin) {
    Stream s;
    for (int i = 0; i < 3; ++i) {
        s.packets.push_back(pkt(0.1 * i, Direction::Outbound, Transport::TCP, "10.0.0.2", 1, "1.1.1.1", 2, 100));
    }
    auto r = compute_rate_series(s, kMicrosPerSecond);
    EXPECT_EQ(r.send_rate, (std::vector<double>{300}));
    EXPECT_EQ(r.recv_rate, (std::vector<double>{0}));
}

TEST(RateSeries, EmptyStreamWithSpan) {
    auto r = compute_rate_series(Stream{}, kMicrosPerSecond, TimeSpan{0, 10 * kMicrosPerSecond});
    EXPECT_EQ(r.size(), 10u);
    for (double v : r.values(RateDirection::Either)) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(compute_rate_series(Stream{}, kMicrosPerSecond).empty());
}

TEST(RateSeries, MatchesBruteForceScan) {
    Gen g(17);
    for (int i = 0; i < 100; ++i) {
        auto s = random_stream(g, 50);
        Micros window = g.coin() ? kMicrosPerSecond : g.range(1, 5) * 500'000;
        auto r = compute_rate_series(s, window);
        auto [send, recv] = oracle_bins(s, r.start_us, window, r.size());
        ASSERT_EQ(r.send_rate, send) << "stream " << i;
        ASSERT_EQ(r.recv_rate, recv) << "stream " << i;
        auto span = aligned_span(s, window);
        auto aligned = compute_rate_series(s, window, span);
        EXPECT_EQ(aligned.start_us % window, 0);
        auto [send2, recv2] = oracle_bins(s, aligned.start_us, window, aligned.size());
        ASSERT_EQ(aligned.send_rate, send2);
        ASSERT_EQ(aligned.recv_rate, recv2);
    }
}

TEST(RateSeries, ByteConservation) {
    Gen g(23);
    for (int i = 0; i < 50; ++i) {
        auto s = random_stream(g, 80);
        auto r = compute_rate_series(s, kMicrosPerSecond);
        double out_bytes = 0, in_bytes = 0;
        for (const auto& p : s.packets) (p.direction == Direction::Outbound ? out_bytes : in_bytes) += p.wire_len;
        double send_sum = 0, recv_sum = 0;
        for (std::size_t b = 0; b < r.size(); ++b) send_sum += r.send_rate[b] * r.window(), recv_sum += r.recv_rate[b] * r.window();
        EXPECT_DOUBLE_EQ(send_sum, out_bytes);
        EXPECT_DOUBLE_EQ(recv_sum, in_bytes);
    }
}

TEST(Smooth, Examples) {
    auto s = series_of({0, 3, 0});
    EXPECT_EQ(smooth(s, 1).send_rate, (std::vector<double>{1.5, 1, 1.5}));
    auto noisy = series_of({5, 1, 9, 2, 7});
    EXPECT_EQ(smooth(noisy, 0).send_rate, noisy.send_rate);
    auto flat = series_of(std::vector<double>(20, 42.0));
    EXPECT_EQ(smooth(flat, 3).send_rate, flat.send_rate);
}

TEST(Baseline, Examples) {
    auto c = baseline(series_of(std::vector<double>(30, 100.0)), RateDirection::Send);
    EXPECT_DOUBLE_EQ(c.median, 100);
    EXPECT_DOUBLE_EQ(c.mad, 0);
    auto b = baseline(series_of({1, 2, 3, 4, 5}), RateDirection::Send);
    EXPECT_DOUBLE_EQ(b.median, 3);
    EXPECT_DOUBLE_EQ(b.mad, 1);
    EXPECT_THROW(baseline(RateSeries{}, RateDirection::Send), InputError);
}

TEST(Baseline, MatchesSortOracle) {
    Gen g(31);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> v(static_cast<std::size_t>(1000 + i % 2));
        for (auto& x : v) x = static_cast<double>(g.range(0, 100000)) / 7.0;
        auto got = baseline(series_of(v), RateDirection::Send);
        auto want = oracle_baseline(v);
        EXPECT_DOUBLE_EQ(got.median, want.median);
        EXPECT_DOUBLE_EQ(got.mad, want.mad);
    }
}

TEST(DetectSpikes, ConstantSeriesIsQuiet) {
    EXPECT_TRUE(detect_spikes(series_of(std::vector<double>(100, 5000.0)), RateDirection::Send, SpikeConfig{}).empty());
    EXPECT_TRUE(detect_spikes(RateSeries{}, RateDirection::Send, SpikeConfig{}).empty());
}

TEST(DetectSpikes, SingleSpikeBin) {
    std::vector<double> v(100, 1.0);
    v[40] = 10000;
    auto s = series_of(v, 1000);
    SpikeConfig cfg;
    cfg.k = 5;
    cfg.floor = 100;
    auto events = detect_spikes(s, RateDirection::Send, cfg);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_DOUBLE_EQ(events[0].time, 1040.5);
    EXPECT_DOUBLE_EQ(events[0].peak_rate, 10000);
    EXPECT_GT(events[0].magnitude, 1);
}

TEST(DetectSpikes, CloseSpikesMergeAtHigherPeak) {
    std::vector<double> v(100, 1.0);
    v[30] = 5000;
    v[33] = 9000;
    auto s = series_of(v);
    SpikeConfig cfg;
    cfg.min_separation = 10;
    auto events = detect_spikes(s, RateDirection::Send, cfg);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_DOUBLE_EQ(events[0].time, 33.5);
    EXPECT_DOUBLE_EQ(events[0].peak_rate, 9000);
    cfg.min_separation = 0.5;
    cfg.smooth_half_width = 0;
    EXPECT_EQ(detect_spikes(s, RateDirection::Send, cfg).size(), 2u);
}

TEST(DetectSpikes, MatchesBruteForceOracle) {
    Gen g(41);
    for (int i = 0; i < 100; ++i) {
        std::size_t n = static_cast<std::size_t>(g.range(1, 400));
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(g.range(50, 300));
        auto bursts = g.range(0, 6);
        for (int b = 0; b < bursts; ++b) {
            auto at = static_cast<std::size_t>(g.range(0, static_cast<std::int64_t>(n) - 1));
            auto len = static_cast<std::size_t>(g.range(1, 12));
            for (std::size_t k = at; k < std::min(n, at + len); ++k) v[k] = static_cast<double>(g.range(500, 20000));
        }
        SpikeConfig cfg;
        cfg.k = static_cast<double>(g.range(2, 8));
        cfg.floor = static_cast<double>(g.range(0, 1000));
        cfg.min_separation = static_cast<double>(g.range(0, 60));
        cfg.smooth_half_width = static_cast<std::size_t>(g.range(0, 4));
        auto s = series_of(v, static_cast<double>(g.range(0, 100000)));
        auto dir = g.coin() ? RateDirection::Send : RateDirection::Either;
        auto events = detect_spikes(s, dir, cfg);
        ASSERT_EQ(event_bins(s, events), oracle_spike_bins(s, dir, cfg)) << "series " << i;
        for (const auto& e : events) {
            EXPECT_GE(e.time, s.start());
            EXPECT_LE(e.time, s.end());
        }
    }
}

TEST(DetectSpikes, ScaleInvariant) {
    Gen g(43);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> v(200);
        for (auto& x : v) x = static_cast<double>(g.range(100, 200));
        for (int b = 0; b < 4; ++b) v[static_cast<std::size_t>(g.range(0, 199))] = static_cast<double>(g.range(2000, 9000));
        SpikeConfig cfg;
        auto s = series_of(v);
        auto base = event_bins(s, detect_spikes(s, RateDirection::Send, cfg));
        for (double c : {0.25, 8.0, 1024.0}) {
            auto scaled = s;
            for (auto& x : scaled.send_rate) x *= c;
            SpikeConfig sc = cfg;
            sc.floor *= c;
            EXPECT_EQ(event_bins(scaled, detect_spikes(scaled, RateDirection::Send, sc)), base);
        }
    }
}

TEST(Bimodal, ConstantIsOneLowSegment) {
    auto segs = classify_bimodal(series_of(std::vector<double>(50, 300.0)), RateDirection::Send, BimodalConfig{});
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].mode, Mode::Low);
    EXPECT_EQ(segs[0].end_bin, 50u);
}

TEST(Bimodal, AlternatingBlocks) {
    Gen g(47);
    std::vector<double> v;
    for (int block = 0; block < 6; ++block) {
        for (int i = 0; i < 120; ++i) {
            double base = block % 2 ? 1e6 : 1e3;
            v.push_back(base * (0.8 + 0.4 * g.unit()));
        }
    }
    auto segs = classify_bimodal(series_of(v, 500), RateDirection::Send, BimodalConfig{});
    ASSERT_EQ(segs.size(), 6u);
    for (std::size_t k = 0; k < segs.size(); ++k) {
        EXPECT_EQ(segs[k].mode, k % 2 ? Mode::High : Mode::Low);
        EXPECT_DOUBLE_EQ(segs[k].t0, 500.0 + 120.0 * static_cast<double>(k));
        EXPECT_DOUBLE_EQ(segs[k].t1, 620.0 + 120.0 * static_cast<double>(k));
    }
}

TEST(Bimodal, ShortDropoutIsAbsorbed) {
    std::vector<double> v(40, 1e3);
    v.resize(200, 1e6);
    for (std::size_t i = 100; i < 105; ++i) v[i] = 1e3;
    auto segs = classify_bimodal(series_of(v), RateDirection::Send, BimodalConfig{});
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0].mode, Mode::Low);
    EXPECT_EQ(segs[1].mode, Mode::High);
    EXPECT_EQ(segs[1].first_bin, 40u);
    EXPECT_EQ(segs[1].end_bin, 200u);

    std::vector<double> high(100, 1e6);
    for (std::size_t i = 50; i < 55; ++i) high[i] = 1e3;
    auto one = classify_bimodal(series_of(high), RateDirection::Send, BimodalConfig{});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].mode, Mode::High);
}

TEST(Bimodal, NoAdjacentSameModeAndFullCover) {
    Gen g(53);
    for (int i = 0; i < 100; ++i) {
        std::size_t n = static_cast<std::size_t>(g.range(1, 300));
        std::vector<double> v(n);
        for (auto& x : v) x = g.coin(30) ? 1e6 * (0.5 + g.unit()) : 1e3 * (0.5 + g.unit());
        BimodalConfig cfg;
        cfg.dwell = static_cast<double>(g.range(0, 40));
        auto segs = classify_bimodal(series_of(v), RateDirection::Send, cfg);
        ASSERT_FALSE(segs.empty());
        EXPECT_EQ(segs.front().first_bin, 0u);
        EXPECT_EQ(segs.back().end_bin, n);
        for (std::size_t k = 1; k < segs.size(); ++k) {
            EXPECT_NE(segs[k].mode, segs[k - 1].mode);
            EXPECT_EQ(segs[k].first_bin, segs[k - 1].end_bin);
        }
    }
}
