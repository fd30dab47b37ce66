#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hometap/flow.hpp"
#include "hometap/labeling.hpp"
#include "hometap/model.hpp"
#include "hometap/profiles.hpp"
#include "hometap/rates.hpp"

namespace hometap {

enum class ProfileKind { Sleep, Camera, Toggle, Interaction };

std::string_view to_string(ProfileKind kind);

/// Device name -> profile, keyed by the names in the shipped fingerprint db.
std::map<std::string, ProfileKind> default_profiles();

/// Local time-of-day window, e.g. 20:00-12:00 (wraps past midnight).
struct NightWindowSpec {
    int start_minute = 20 * 60;
    int end_minute = 12 * 60;
    int utc_offset_minutes = 0;

    static std::optional<NightWindowSpec> parse(std::string_view text);
    std::string to_string() const;
};

/// Absolute night windows that overlap [t0, t1].
std::vector<NightWindow> night_windows(const NightWindowSpec& spec, double t0, double t1);

struct PipelineConfig {
    Cidr home_subnet{Ipv4(10, 0, 0, 0), 24};
    FingerprintDb fingerprints = default_fingerprints();
    std::map<std::string, ProfileKind> profiles = default_profiles();
    Micros window_us = kMicrosPerSecond;
    SpikeConfig spikes;
    BimodalConfig bimodal;
    NightWindowSpec night;
    RateDirection direction = RateDirection::Either;
    LabelOptions labeling;
};

struct StreamReport {
    StreamKey key;
    DeviceLabel label;
    StreamStats stats;
    RateSeries series;
};

struct SleepFinding {
    StreamKey stream;
    std::string device;
    NightWindow window;
    SleepInference inference;
};

struct CameraFinding {
    StreamKey stream;
    std::string device;
    double series_start = 0.0;
    double series_end = 0.0;
    CameraReport report;
};

struct ToggleFinding {
    StreamKey stream;
    std::string device;
    ToggleReport report;
};

struct InteractionFinding {
    std::string device;
    std::size_t candidates = 0;
    InteractionReport report;
};

struct PipelineCounters {
    std::size_t packets = 0;
    std::size_t unknown_direction = 0;
    std::size_t dns_observations = 0;
    std::size_t labeled_streams = 0;
    std::size_t resolver_lookups = 0;
    std::size_t resolver_failures = 0;
};

struct ActivityReport {
    std::vector<StreamReport> streams;
    std::vector<SleepFinding> sleep;
    std::vector<CameraFinding> camera;
    std::vector<ToggleFinding> toggles;
    std::vector<InteractionFinding> interactions;
    PipelineCounters counters;

    std::size_t finding_count() const {
        return sleep.size() + camera.size() + toggles.size() + interactions.size();
    }
};

/// validate -> tag direction -> extract DNS -> separate -> label -> per-device profiles.
ActivityReport run_pipeline(const Trace& trace, const PipelineConfig& config);

/// Timed activities implied by the findings, using the simulator's activity names.
std::vector<TruthEntry> report_events(const ActivityReport& report);

/// JSON document with "streams", "findings" and "counters".
std::string report_to_json(const ActivityReport& report);
/// One line per finding.
std::vector<std::string> summary_lines(const ActivityReport& report);
/// Long format: stream_id,t,send_Bps,recv_Bps.
std::string rates_csv(const ActivityReport& report);

}  // namespace hometap
