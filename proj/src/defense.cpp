#include "hometap/defense.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <set>

#include "hometap/flow.hpp"
#include "json.hpp"

namespace hometap {

namespace {

constexpr std::uint32_t kMinPadding = 64;

Micros bin_of(Micros ts) { return ts >= 0 ? ts / kMicrosPerSecond : (ts - kMicrosPerSecond + 1) / kMicrosPerSecond; }

std::uint32_t l4_overhead(Transport t) {
    switch (t) {
        case Transport::TCP: return 54;
        case Transport::UDP: return 42;
        case Transport::Other: break;
    }
    return 34;
}

// Padding sizes summing to `bytes`, none above mtu. A remainder too small to
// frame borrows from the last full packet.
std::vector<std::uint32_t> padding_sizes(std::uint64_t bytes, std::uint32_t mtu) {
    std::vector<std::uint32_t> out(bytes / mtu, mtu);
    auto rem = static_cast<std::uint32_t>(bytes % mtu);
    if (rem == 0) return out;
    if (rem < kMinPadding && !out.empty() && mtu >= 2 * kMinPadding) {
        out.back() = mtu + rem - kMinPadding;
        out.push_back(kMinPadding);
    } else {
        out.push_back(rem);
    }
    return out;
}

struct FlowQueue {
    Ipv4 local_ip;
    StreamKey key;
    Direction direction;
    std::vector<const PacketRecord*> packets;  // time order
};

}  // namespace

ShapeResult shape_constant_rate(const Trace& trace, const ShapeOptions& options) {
    if (!(options.target_rate > 0)) throw InputError("shape: target rate must be positive");
    if (options.mtu == 0) throw InputError("shape: mtu must be positive");
    const auto capacity = static_cast<std::uint64_t>(std::llround(options.target_rate));

    ShapeResult result;
    result.trace.home_subnet = trace.home_subnet;
    auto& out = result.trace.packets;
    auto& stats = result.stats;

    // Group by (key, direction); std::map keeps the flow order deterministic.
    std::map<std::pair<StreamKey, Direction>, FlowQueue> flows;
    for (const auto& p : trace.packets) {
        if (p.direction == Direction::Unknown) {
            out.push_back(p);
            continue;
        }
        auto key = StreamKey::of(p);
        for (Direction d : {Direction::Outbound, Direction::Inbound}) {
            auto [it, fresh] = flows.try_emplace({key, d});
            if (fresh) it->second = FlowQueue{p.local_ip, key, d, {}};
        }
        flows[{key, p.direction}].packets.push_back(&p);
    }
    for (const auto& extra : options.extra_flows) {
        for (Direction d : {Direction::Outbound, Direction::Inbound}) {
            auto [it, fresh] = flows.try_emplace({extra.key, d});
            if (fresh) it->second = FlowQueue{extra.local_ip, extra.key, d, {}};
        }
    }
    for (auto& [id, f] : flows) {
        std::stable_sort(f.packets.begin(), f.packets.end(),
                         [](const auto* a, const auto* b) { return a->ts_us < b->ts_us; });
    }

    std::map<Micros, std::uint64_t> backlog;
    for (const auto& [id, f] : flows) {
        // Both directions of a stream share the stream's lifetime.
        Micros first_bin = 0, end_bin = 0;
        bool have = false;
        for (Direction d : {Direction::Outbound, Direction::Inbound}) {
            auto it = flows.find({f.key, d});
            if (it == flows.end() || it->second.packets.empty()) continue;
            Micros lo = bin_of(it->second.packets.front()->ts_us), hi = bin_of(it->second.packets.back()->ts_us) + 1;
            first_bin = have ? std::min(first_bin, lo) : lo;
            end_bin = have ? std::max(end_bin, hi) : hi;
            have = true;
        }
        if (options.span) {
            Micros lo = bin_of(options.span->begin), hi = bin_of(options.span->end - 1) + 1;
            first_bin = have ? std::min(first_bin, lo) : lo;
            end_bin = have ? std::max(end_bin, hi) : hi;
            have = true;
        }
        if (!have) continue;

        std::deque<const PacketRecord*> queue;
        std::uint64_t queued = 0;
        std::size_t next = 0;
        for (Micros bin = first_bin; bin < end_bin || !queue.empty() || next < f.packets.size(); ++bin) {
            Micros bin_start = bin * kMicrosPerSecond;
            while (next < f.packets.size() && f.packets[next]->ts_us < bin_start + kMicrosPerSecond) {
                queue.push_back(f.packets[next]);
                queued += f.packets[next]->wire_len;
                ++next;
            }
            std::uint64_t used = 0;
            bool sent_any = false;
            while (!queue.empty()) {
                const auto* p = queue.front();
                if (used + p->wire_len > capacity && sent_any) break;
                if (used + p->wire_len > capacity && p->wire_len <= capacity) break;
                PacketRecord copy = *p;
                copy.ts_us = std::max(p->ts_us, bin_start);
                stats.max_delay = std::max(stats.max_delay, micros_to_seconds(copy.ts_us - p->ts_us));
                out.push_back(std::move(copy));
                used += p->wire_len;
                queued -= p->wire_len;
                sent_any = true;
                queue.pop_front();
            }
            if (used < capacity) {
                auto sizes = padding_sizes(capacity - used, options.mtu);
                for (std::size_t k = 0; k < sizes.size(); ++k) {
                    PacketRecord pad;
                    pad.ts_us = bin_start + static_cast<Micros>((2 * k + 1) * kMicrosPerSecond / (2 * sizes.size()));
                    pad.direction = f.direction;
                    pad.transport = f.key.transport;
                    pad.synthetic = true;
                    pad.local_ip = f.local_ip;
                    pad.remote_ip = f.key.remote_ip;
                    pad.local_port = f.key.local_port;
                    pad.remote_port = f.key.remote_port;
                    pad.wire_len = sizes[k];
                    pad.payload_len = sizes[k] > l4_overhead(pad.transport) ? sizes[k] - l4_overhead(pad.transport) : 0;
                    stats.padding_bytes += sizes[k];
                    ++stats.padding_packets;
                    out.push_back(std::move(pad));
                }
            }
            backlog[bin] += queued;
        }
    }

    if (!backlog.empty()) {
        Micros lo = backlog.begin()->first, hi = backlog.rbegin()->first;
        stats.grid_start = lo * kMicrosPerSecond;
        stats.backlog.assign(static_cast<std::size_t>(hi - lo + 1), 0);
        for (const auto& [bin, bytes] : backlog) stats.backlog[static_cast<std::size_t>(bin - lo)] = bytes;
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    return result;
}

double peak_stream_rate(const Trace& trace) {
    std::map<std::tuple<StreamKey, Direction, Micros>, std::uint64_t> bins;
    std::uint64_t peak = 0;
    for (const auto& p : trace.packets) {
        if (p.direction == Direction::Unknown) continue;
        auto& b = bins[{StreamKey::of(p), p.direction, bin_of(p.ts_us)}];
        b += p.wire_len;
        peak = std::max(peak, b);
    }
    return static_cast<double>(peak);
}

Trace tunnel_aggregate(const Trace& trace, const TunnelOptions& options) {
    Trace out = trace;
    for (auto& p : out.packets) {
        p.remote_ip = options.remote;
        p.remote_port = options.port;
        p.local_port = options.local_port;
        p.transport = Transport::UDP;
        p.wire_len += options.overhead;
        p.payload_len = p.wire_len > l4_overhead(Transport::UDP) ? p.wire_len - l4_overhead(Transport::UDP) : 0;
        p.dns.reset();
    }
    return out;
}

// ===== Evaluation =====

std::size_t match_within(std::vector<double> truth, std::vector<double> predicted, double tolerance) {
    std::sort(truth.begin(), truth.end());
    std::sort(predicted.begin(), predicted.end());
    std::size_t i = 0, j = 0, matched = 0;
    while (i < truth.size() && j < predicted.size()) {
        if (std::abs(truth[i] - predicted[j]) <= tolerance) {
            ++matched, ++i, ++j;
        } else if (predicted[j] < truth[i]) {
            ++j;
        } else {
            ++i;
        }
    }
    return matched;
}

Metrics score_report(const ActivityReport& report, const GroundTruth& truth, double tolerance) {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::vector<double>> expected, found;
    for (const auto& e : truth.entries) expected[{e.device, e.activity}].push_back(e.t);
    for (const auto& e : report_events(report)) found[{e.device, e.activity}].push_back(e.t);

    Metrics metrics;
    for (const auto& [key, times] : expected) metrics[key.first].truth += times.size();
    for (const auto& [key, times] : found) metrics[key.first].predicted += times.size();
    for (const auto& [key, times] : expected) {
        if (auto it = found.find(key); it != found.end()) {
            metrics[key.first].matched += match_within(times, it->second, tolerance);
        }
    }
    for (const auto& s : report.streams) {
        if (s.label.unknown()) continue;
        if (auto it = metrics.find(s.label.device); it != metrics.end()) {
            it->second.label_confidence = std::max(it->second.label_confidence, s.label.confidence);
        }
    }
    for (auto& [device, m] : metrics) {
        if (m.predicted > 0) m.precision = static_cast<double>(m.matched) / static_cast<double>(m.predicted);
        if (m.truth > 0) m.recall = static_cast<double>(m.matched) / static_cast<double>(m.truth);
    }
    return metrics;
}

std::uint64_t total_wire_bytes(const Trace& trace) {
    std::uint64_t total = 0;
    for (const auto& p : trace.packets) total += p.wire_len;
    return total;
}

DefenseReport evaluate_defense(const Trace& original, const Trace& defended, const GroundTruth& truth,
                               const EvaluationConfig& config) {
    auto after_run = std::async(std::launch::async, [&] { return run_pipeline(defended, config.pipeline); });
    auto before = run_pipeline(original, config.pipeline);
    auto after = after_run.get();

    DefenseReport r;
    r.before = score_report(before, truth, config.tolerance);
    r.after = score_report(after, truth, config.tolerance);
    // Devices present on one side only still get a row on the other.
    for (const auto& [device, m] : r.before) r.after.try_emplace(device);
    for (const auto& [device, m] : r.after) r.before.try_emplace(device);
    r.original_bytes = total_wire_bytes(original);
    r.defended_bytes = total_wire_bytes(defended);
    if (r.original_bytes > 0) {
        r.overhead = static_cast<double>(r.defended_bytes) / static_cast<double>(r.original_bytes) - 1.0;
    }
    r.streams_before = before.streams.size();
    r.streams_after = after.streams.size();
    return r;
}

std::string defense_report_to_json(const DefenseReport& r) {
    using nlohmann::ordered_json;
    auto metrics = [](const Metrics& m) {
        ordered_json out = ordered_json::object();
        for (const auto& [device, d] : m) {
            out[device] = {{"precision", d.precision},
                           {"recall", d.recall},
                           {"label_confidence", d.label_confidence},
                           {"truth", d.truth},
                           {"predicted", d.predicted},
                           {"matched", d.matched}};
        }
        return out;
    };
    ordered_json doc{{"before", metrics(r.before)},
                     {"after", metrics(r.after)},
                     {"overhead", r.overhead},
                     {"original_bytes", r.original_bytes},
                     {"defended_bytes", r.defended_bytes},
                     {"streams_before", r.streams_before},
                     {"streams_after", r.streams_after}};
    return doc.dump(2) + "\n";
}

}  // namespace hometap
