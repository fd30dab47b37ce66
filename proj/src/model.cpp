#include "hometap/model.hpp"

#include <algorithm>
#include <cmath>

namespace hometap {

Micros seconds_to_micros(double seconds) { return static_cast<Micros>(std::llround(seconds * 1e6)); }

TraceError::TraceError(std::size_t index, const std::string& what)
    : InputError("packet " + std::to_string(index) + ": " + what), index_(index) {}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::Outbound: return "outbound";
        case Direction::Inbound: return "inbound";
        case Direction::Unknown: break;
    }
    return "unknown";
}

std::string_view to_string(Transport t) {
    switch (t) {
        case Transport::TCP: return "tcp";
        case Transport::UDP: return "udp";
        case Transport::Other: break;
    }
    return "other";
}

std::optional<Transport> transport_from_string(std::string_view name) {
    if (name == "tcp") return Transport::TCP;
    if (name == "udp") return Transport::UDP;
    if (name == "other") return Transport::Other;
    return std::nullopt;
}

std::string_view to_string(RateDirection d) {
    switch (d) {
        case RateDirection::Send: return "send";
        case RateDirection::Recv: return "recv";
        case RateDirection::Either: break;
    }
    return "either";
}

bool operator==(const PacketRecord& a, const PacketRecord& b) {
    auto dns_equal = [](const auto& x, const auto& y) {
        if (!x || !y) return !x && !y;
        return *x == *y;
    };
    return a.ts_us == b.ts_us && a.direction == b.direction && a.transport == b.transport &&
           a.synthetic == b.synthetic && a.local_ip == b.local_ip && a.remote_ip == b.remote_ip &&
           a.local_port == b.local_port && a.remote_port == b.remote_port && a.wire_len == b.wire_len &&
           a.payload_len == b.payload_len && dns_equal(a.dns, b.dns);
}

Trace validate_trace(Trace trace) {
    auto& pkts = trace.packets;
    for (std::size_t i = 0; i < pkts.size(); ++i) {
        const auto& p = pkts[i];
        if (p.ts_us < 0) throw TraceError(i, "negative timestamp");
        if (p.wire_len < p.payload_len) throw TraceError(i, "payload_len exceeds wire_len");
        if (p.transport != Transport::Other && (p.local_port == 0 || p.remote_port == 0)) {
            throw TraceError(i, "port 0 on a tcp/udp packet");
        }
        if (p.dns && p.dns->query.empty()) throw TraceError(i, "empty dns query name");
    }
    std::stable_sort(pkts.begin(), pkts.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.ts_us < b.ts_us; });
    return trace;
}

std::string StreamKey::id() const {
    return remote_ip.to_string() + ':' + std::to_string(remote_port) + '/' + std::string(to_string(transport)) +
           '@' + std::to_string(local_port);
}

std::vector<double> RateSeries::values(RateDirection d) const {
    switch (d) {
        case RateDirection::Send: return send_rate;
        case RateDirection::Recv: return recv_rate;
        case RateDirection::Either: break;
    }
    std::vector<double> sum(send_rate.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = send_rate[i] + recv_rate[i];
    return sum;
}

RateSeries RateSeries::slice(std::size_t first, std::size_t last) const {
    last = std::min(last, size());
    first = std::min(first, last);
    RateSeries out;
    out.start_us = start_us + window_us * static_cast<Micros>(first);
    out.window_us = window_us;
    out.send_rate.assign(send_rate.begin() + first, send_rate.begin() + last);
    out.recv_rate.assign(recv_rate.begin() + first, recv_rate.begin() + last);
    return out;
}

}  // namespace hometap
