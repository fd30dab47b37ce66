#include "hometap/flow.hpp"

#include <algorithm>
#include <numeric>

namespace hometap {

StreamSet separate_streams(const Trace& trace) {
    const auto& pkts = trace.packets;
    std::vector<std::size_t> order;
    order.reserve(pkts.size());
    StreamSet out;
    for (std::size_t i = 0; i < pkts.size(); ++i) {
        if (pkts[i].direction == Direction::Unknown) {
            ++out.unknown_direction;
        } else {
            order.push_back(i);
        }
    }
    // Key first, then time; index breaks ties so equal timestamps keep input order.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ka = StreamKey::of(pkts[a]), kb = StreamKey::of(pkts[b]);
        if (ka != kb) return ka < kb;
        if (pkts[a].ts_us != pkts[b].ts_us) return pkts[a].ts_us < pkts[b].ts_us;
        return a < b;
    });
    for (std::size_t i : order) {
        auto key = StreamKey::of(pkts[i]);
        if (out.streams.empty() || out.streams.back().key != key) out.streams.push_back(Stream{key, {}, std::nullopt});
        out.streams.back().packets.push_back(pkts[i]);
    }
    return out;
}

StreamStats stream_stats(const Stream& stream) {
    StreamStats s;
    s.packets = stream.packets.size();
    if (stream.packets.empty()) return s;
    s.first = stream.packets.front().timestamp();
    s.last = stream.packets.front().timestamp();
    for (const auto& p : stream.packets) {
        if (p.direction == Direction::Outbound) s.send_bytes += p.wire_len;
        if (p.direction == Direction::Inbound) s.recv_bytes += p.wire_len;
        s.first = std::min(s.first, p.timestamp());
        s.last = std::max(s.last, p.timestamp());
    }
    return s;
}

}  // namespace hometap
