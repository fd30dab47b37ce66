// Shared generators and brute-force oracles for the test binaries.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "hometap/flow.hpp"
#include "hometap/model.hpp"
#include "hometap/rates.hpp"

namespace hometap::testing {

/// Small deterministic generator; the tests only need integer ranges.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    std::uint64_t next() { return rng_(); }
    std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
        return lo + static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    bool coin(int percent = 50) { return range(0, 99) < percent; }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))]; }

private:
    std::mt19937_64 rng_;
};

inline PacketRecord pkt(double ts, Direction d, Transport t, const char* local, std::uint16_t lport, const char* remote,
                        std::uint16_t rport, std::uint32_t wire, std::uint32_t payload = 0) {
    PacketRecord p;
    p.ts_us = seconds_to_micros(ts);
    p.direction = d;
    p.transport = t;
    p.local_ip = *Ipv4::parse(local);
    p.remote_ip = *Ipv4::parse(remote);
    p.local_port = lport;
    p.remote_port = rport;
    p.wire_len = wire;
    p.payload_len = payload;
    return p;
}

/// Untagged trace that both writers can represent exactly: sorted timestamps,
/// frames large enough for their headers, DNS only on udp/53 responses.
inline Trace random_wire_trace(Gen& g, std::size_t max_packets = 40) {
    static const std::vector<std::string> names = {"nexus.dropcam.com", "sense-in.hello.is", "pindorama.amazon.com",
                                                   "a.b.example", "x"};
    Trace t;
    auto n = static_cast<std::size_t>(g.range(0, static_cast<std::int64_t>(max_packets)));
    Micros ts = g.range(0, 2'000'000'000) * 1'000'000 + g.range(0, 999'999);
    for (std::size_t i = 0; i < n; ++i) {
        PacketRecord p;
        ts += g.range(0, 3'000'000);
        p.ts_us = ts;
        p.direction = Direction::Unknown;
        auto roll = g.range(0, 9);
        p.transport = roll < 5 ? Transport::TCP : roll < 9 ? Transport::UDP : Transport::Other;
        p.local_ip = Ipv4(static_cast<std::uint32_t>(g.next()));
        p.remote_ip = Ipv4(static_cast<std::uint32_t>(g.next()));
        if (p.transport != Transport::Other) {
            p.local_port = static_cast<std::uint16_t>(g.range(1, 65535));
            p.remote_port = static_cast<std::uint16_t>(g.range(1, 65535));
        }
        std::uint32_t l4 = p.transport == Transport::TCP ? 20 : p.transport == Transport::UDP ? 8 : 0;
        p.payload_len = static_cast<std::uint32_t>(g.range(0, 1400));
        if (p.transport == Transport::UDP && g.coin(20)) {
            auto dns = std::make_shared<DnsAnswer>();
            dns->query = g.pick(names);
            auto count = g.range(1, 4);
            for (int k = 0; k < count; ++k) dns->answers.push_back(Ipv4(static_cast<std::uint32_t>(g.next())));
            std::sort(dns->answers.begin(), dns->answers.end());
            dns->answers.erase(std::unique(dns->answers.begin(), dns->answers.end()), dns->answers.end());
            p.local_port = 53;
            std::uint32_t need = static_cast<std::uint32_t>(12 + dns->query.size() + 2 + 4 + 16 * dns->answers.size());
            p.payload_len = std::max(p.payload_len, need);
            p.dns = std::move(dns);
        }
        p.wire_len = 14 + 20 + l4 + p.payload_len + static_cast<std::uint32_t>(g.range(0, 30));
        t.packets.push_back(std::move(p));
    }
    return t;
}

/// Direction-tagged trace with few distinct keys so groups collide often.
inline Trace random_tagged_trace(Gen& g, std::size_t max_packets = 100) {
    static const std::vector<std::string> remotes = {"52.1.1.1", "52.1.1.2", "8.8.8.8"};
    Trace t;
    auto n = static_cast<std::size_t>(g.range(0, static_cast<std::int64_t>(max_packets)));
    for (std::size_t i = 0; i < n; ++i) {
        PacketRecord p;
        p.ts_us = g.range(0, 20) * 500'000;  // many equal timestamps
        auto d = g.range(0, 9);
        p.direction = d < 5 ? Direction::Outbound : d < 9 ? Direction::Inbound : Direction::Unknown;
        p.transport = g.coin(80) ? Transport::TCP : Transport::UDP;
        p.local_ip = Ipv4(10, 0, 0, static_cast<std::uint8_t>(g.range(1, 3)));
        p.remote_ip = *Ipv4::parse(g.pick(remotes));
        p.local_port = static_cast<std::uint16_t>(g.range(5000, 5002));
        p.remote_port = g.coin() ? 443 : 80;
        p.wire_len = static_cast<std::uint32_t>(g.range(60, 1500));
        t.packets.push_back(p);
    }
    std::stable_sort(t.packets.begin(), t.packets.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    return t;
}

inline Stream random_stream(Gen& g, std::size_t packets) {
    Stream s;
    s.key = StreamKey{Ipv4(52, 1, 1, 1), 443, 5000, Transport::TCP};
    Micros base = g.range(0, 1000) * 1'000'000;
    for (std::size_t i = 0; i < packets; ++i) {
        PacketRecord p;
        p.ts_us = base + g.range(0, 60'000'000);
        p.direction = g.coin() ? Direction::Outbound : Direction::Inbound;
        p.local_ip = Ipv4(10, 0, 0, 2);
        p.remote_ip = s.key.remote_ip;
        p.local_port = 5000;
        p.remote_port = 443;
        p.wire_len = static_cast<std::uint32_t>(g.range(40, 1500));
        s.packets.push_back(p);
    }
    std::sort(s.packets.begin(), s.packets.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    return s;
}

// ===== Oracles =====

/// Groups by exhaustive comparison against every group seen so far.
inline std::vector<Stream> oracle_group(const Trace& trace) {
    std::vector<Stream> groups;
    for (const auto& p : trace.packets) {
        if (p.direction == Direction::Unknown) continue;
        Stream* found = nullptr;
        for (auto& g : groups) {
            const auto& q = g.packets.front();
            if (q.remote_ip == p.remote_ip && q.remote_port == p.remote_port && q.local_port == p.local_port &&
                q.transport == p.transport) {
                found = &g;
            }
        }
        if (!found) {
            groups.push_back(Stream{StreamKey::of(p), {}, std::nullopt});
            found = &groups.back();
        }
        found->packets.push_back(p);
    }
    for (auto& g : groups) {
        std::stable_sort(g.packets.begin(), g.packets.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return groups;
}

/// Bin sums by scanning every packet for every bin.
inline std::pair<std::vector<double>, std::vector<double>> oracle_bins(const Stream& s, Micros start, Micros window,
                                                                       std::size_t bins) {
    std::vector<double> send(bins, 0.0), recv(bins, 0.0);
    for (std::size_t i = 0; i < bins; ++i) {
        Micros lo = start + static_cast<Micros>(i) * window, hi = lo + window;
        for (const auto& p : s.packets) {
            if (p.ts_us < lo || p.ts_us >= hi) continue;
            (p.direction == Direction::Outbound ? send : recv)[i] += p.wire_len;
        }
    }
    for (auto& v : send) v /= micros_to_seconds(window);
    for (auto& v : recv) v /= micros_to_seconds(window);
    return {send, recv};
}

inline double oracle_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline Baseline oracle_baseline(const std::vector<double>& v) {
    double med = oracle_median(v);
    std::vector<double> dev;
    for (double x : v) dev.push_back(std::abs(x - med));
    return {med, oracle_median(dev)};
}

/// Threshold every smoothed bin, join all pairs within min_separation, and
/// put each cluster's event at its highest raw bin.
inline std::vector<std::size_t> oracle_spike_bins(const RateSeries& series, RateDirection dir, const SpikeConfig& cfg) {
    auto raw = series.values(dir);
    std::size_t n = raw.size(), h = cfg.smooth_half_width;
    if (n == 0) return {};
    std::vector<double> sm(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j + h >= i && j <= i + h) sum += raw[j], ++count;
        }
        sm[i] = sum / static_cast<double>(count);
    }
    auto base = oracle_baseline(raw);
    double threshold = std::max(base.median + cfg.k * base.mad, cfg.floor);
    std::vector<std::size_t> hot;
    for (std::size_t i = 0; i < n; ++i) {
        if (sm[i] > threshold) hot.push_back(i);
    }
    std::vector<std::size_t> parent(hot.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x];
        return x;
    };
    for (std::size_t a = 0; a < hot.size(); ++a) {
        for (std::size_t b = a + 1; b < hot.size(); ++b) {
            if (series.bin_center(hot[b]) - series.bin_center(hot[a]) <= cfg.min_separation) parent[root(b)] = root(a);
        }
    }
    std::map<std::size_t, std::size_t> best;  // root -> peak bin
    for (std::size_t a = 0; a < hot.size(); ++a) {
        auto r = root(a);
        auto it = best.find(r);
        if (it == best.end() || raw[hot[a]] > raw[it->second]) best[r] = hot[a];
    }
    std::vector<std::size_t> out;
    for (const auto& [r, bin] : best) out.push_back(bin);
    std::sort(out.begin(), out.end());
    return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("hometap-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace hometap::testing
