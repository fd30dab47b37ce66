#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hometap/net.hpp"

namespace hometap {

// ===== Time =====

/// Timestamps and durations are carried as integer microseconds.
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;

Micros seconds_to_micros(double seconds);
inline constexpr double micros_to_seconds(Micros us) { return static_cast<double>(us) / 1e6; }

// ===== Errors =====

/// Malformed or unusable input (files, flags, schemas).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A packet record that violates the trace invariants.
class TraceError : public InputError {
public:
    TraceError(std::size_t index, const std::string& what);
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// ===== Packets =====

enum class Direction : std::uint8_t { Outbound, Inbound, Unknown };
enum class Transport : std::uint8_t { TCP, UDP, Other };

std::string_view to_string(Direction d);
std::string_view to_string(Transport t);
std::optional<Transport> transport_from_string(std::string_view name);

/// Decoded A-record answers of one DNS response, keyed by the original query name.
struct DnsAnswer {
    std::string query;           // lowercase, no trailing dot
    std::vector<Ipv4> answers;   // sorted, unique

    friend bool operator==(const DnsAnswer&, const DnsAnswer&) = default;
};

/// Header-level metadata of one packet as seen at the WAN tap.
///
/// Before direction tagging, `local_*` holds the source side and `remote_*`
/// the destination side. After tagging, `local_*` is the home side.
struct PacketRecord {
    Micros ts_us = 0;
    Direction direction = Direction::Unknown;
    Transport transport = Transport::TCP;
    bool synthetic = false;  // shaper padding; never serialized
    Ipv4 local_ip;
    Ipv4 remote_ip;
    std::uint16_t local_port = 0;
    std::uint16_t remote_port = 0;
    std::uint32_t wire_len = 0;
    std::uint32_t payload_len = 0;
    std::shared_ptr<const DnsAnswer> dns;

    double timestamp() const { return micros_to_seconds(ts_us); }

    Ipv4 src_ip() const { return direction == Direction::Inbound ? remote_ip : local_ip; }
    Ipv4 dst_ip() const { return direction == Direction::Inbound ? local_ip : remote_ip; }
    std::uint16_t src_port() const { return direction == Direction::Inbound ? remote_port : local_port; }
    std::uint16_t dst_port() const { return direction == Direction::Inbound ? local_port : remote_port; }

    friend bool operator==(const PacketRecord& a, const PacketRecord& b);
};

struct Trace {
    std::vector<PacketRecord> packets;
    std::optional<Cidr> home_subnet;

    bool empty() const { return packets.empty(); }
    std::size_t size() const { return packets.size(); }
};

/// Sorts packets by timestamp (stable) and checks every record invariant.
/// Throws TraceError naming the offending input index.
Trace validate_trace(Trace trace);

// ===== Streams =====

struct StreamKey {
    Ipv4 remote_ip;
    std::uint16_t remote_port = 0;
    std::uint16_t local_port = 0;
    Transport transport = Transport::TCP;

    static StreamKey of(const PacketRecord& p) {
        return StreamKey{p.remote_ip, p.remote_port, p.local_port, p.transport};
    }
    /// Stable identifier, e.g. "52.1.1.1:443/tcp@5000".
    std::string id() const;

    friend constexpr auto operator<=>(const StreamKey&, const StreamKey&) = default;
};

struct DeviceLabel {
    std::string device = "Unknown";
    std::string manufacturer;
    double confidence = 0.0;
    std::vector<std::string> matched_domains;

    bool unknown() const { return matched_domains.empty(); }

    friend bool operator==(const DeviceLabel&, const DeviceLabel&) = default;
};

struct Stream {
    StreamKey key;
    std::vector<PacketRecord> packets;
    std::optional<DeviceLabel> label;
};

struct DnsObservation {
    Micros ts_us = 0;
    std::string query_name;
    std::vector<Ipv4> answers;

    friend bool operator==(const DnsObservation&, const DnsObservation&) = default;
};

// ===== Rates and events =====

/// Which rate an analysis reads. `Either` is the per-bin sum of send and receive.
enum class RateDirection : std::uint8_t { Send, Recv, Either };

std::string_view to_string(RateDirection d);

struct RateSeries {
    Micros start_us = 0;
    Micros window_us = kMicrosPerSecond;
    std::vector<double> send_rate;  // bytes/s, home -> service
    std::vector<double> recv_rate;  // bytes/s, service -> home

    std::size_t size() const { return send_rate.size(); }
    bool empty() const { return send_rate.empty(); }
    double window() const { return micros_to_seconds(window_us); }
    double start() const { return micros_to_seconds(start_us); }
    double end() const { return micros_to_seconds(start_us + window_us * static_cast<Micros>(size())); }
    double bin_start(std::size_t i) const {
        return micros_to_seconds(start_us + window_us * static_cast<Micros>(i));
    }
    double bin_center(std::size_t i) const { return bin_start(i) + window() / 2.0; }

    std::vector<double> values(RateDirection d) const;
    /// Bins [first, last) as a new series.
    RateSeries slice(std::size_t first, std::size_t last) const;
};

enum class EventKind : std::uint8_t { Spike };

struct Event {
    double time = 0.0;  // bin center, seconds
    RateDirection direction = RateDirection::Either;
    double peak_rate = 0.0;
    double magnitude = 0.0;
    EventKind kind = EventKind::Spike;
};

// ===== Ground truth =====

struct TruthEntry {
    double t = 0.0;
    std::string device;
    std::string activity;

    friend bool operator==(const TruthEntry&, const TruthEntry&) = default;
};

struct GroundTruth {
    std::vector<TruthEntry> entries;  // sorted by t
};

/// Activity names shared by the simulator's ground truth and the inference report.
namespace activity {
inline constexpr const char* kBedtime = "bedtime";
inline constexpr const char* kInterruption = "interruption";
inline constexpr const char* kWake = "wake";
inline constexpr const char* kStreamStart = "stream_start";
inline constexpr const char* kStreamStop = "stream_stop";
inline constexpr const char* kMotion = "motion";
inline constexpr const char* kToggle = "toggle";
inline constexpr const char* kInteraction = "interaction";
}  // namespace activity

}  // namespace hometap
