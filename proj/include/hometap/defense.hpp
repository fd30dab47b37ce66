#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hometap/model.hpp"
#include "hometap/pipeline.hpp"
#include "hometap/rates.hpp"

namespace hometap {

// ===== Constant-rate shaping =====

struct ShapedFlow {
    Ipv4 local_ip;
    StreamKey key;
};

struct ShapeOptions {
    double target_rate = 0.0;  // bytes/s, per stream and direction
    std::uint32_t mtu = 1400;
    /// Shared shaping window; by default each stream is shaped over its own lifetime.
    std::optional<TimeSpan> span;
    /// Flows to pad even when the trace carries no packets for them.
    std::vector<ShapedFlow> extra_flows;
};

struct ShapeStats {
    std::uint64_t padding_bytes = 0;
    std::uint64_t padding_packets = 0;
    double max_delay = 0.0;           // seconds a packet waited in the queue
    Micros grid_start = 0;            // start of backlog[0]
    std::vector<std::uint64_t> backlog;  // queued bytes left after each 1 s bin, all flows
};

struct ShapeResult {
    Trace trace;
    ShapeStats stats;
};

/// Pads every stream and direction of a direction-tagged trace to `target_rate`
/// per 1 s bin. Bytes above the target wait in a FIFO queue and drain at the
/// target rate; nothing is dropped. Unknown-direction packets pass through.
ShapeResult shape_constant_rate(const Trace& trace, const ShapeOptions& options);

/// Highest per-stream, per-direction byte count in any 1 s bin.
double peak_stream_rate(const Trace& trace);

// ===== Tunnel aggregation =====

struct TunnelOptions {
    Ipv4 remote{198, 51, 100, 1};
    std::uint16_t port = 1194;
    std::uint16_t local_port = 1194;
    std::uint32_t overhead = 40;  // bytes added per packet
};

/// Rewrites every packet onto one UDP flow to the tunnel endpoint and drops
/// DNS answers. Timestamps, directions and packet count are preserved.
Trace tunnel_aggregate(const Trace& trace, const TunnelOptions& options);

// ===== Evaluation =====

struct DeviceMetrics {
    std::size_t truth = 0;
    std::size_t predicted = 0;
    std::size_t matched = 0;
    double precision = 1.0;  // 1 when nothing was predicted
    double recall = 1.0;     // 1 when there is nothing to find
    double label_confidence = 0.0;

    friend bool operator==(const DeviceMetrics&, const DeviceMetrics&) = default;
};

using Metrics = std::map<std::string, DeviceMetrics>;

/// Largest one-to-one matching of times within +-tolerance (greedy on sorted times).
std::size_t match_within(std::vector<double> truth, std::vector<double> predicted, double tolerance);

/// Per-device scores; events match only with the same device and activity.
Metrics score_report(const ActivityReport& report, const GroundTruth& truth, double tolerance);

struct EvaluationConfig {
    PipelineConfig pipeline;
    double tolerance = 30.0;
};

struct DefenseReport {
    Metrics before;
    Metrics after;
    std::uint64_t original_bytes = 0;
    std::uint64_t defended_bytes = 0;
    double overhead = 0.0;  // defended / original - 1
    std::size_t streams_before = 0;
    std::size_t streams_after = 0;
};

std::uint64_t total_wire_bytes(const Trace& trace);

DefenseReport evaluate_defense(const Trace& original, const Trace& defended, const GroundTruth& truth,
                               const EvaluationConfig& config);

/// {"before": metrics, "after": metrics, "overhead": float, ...}
std::string defense_report_to_json(const DefenseReport& report);

}  // namespace hometap
