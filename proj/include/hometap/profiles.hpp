#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hometap/model.hpp"
#include "hometap/rates.hpp"

namespace hometap {

// ===== Sleep monitor =====

struct NightWindow {
    double t0 = 0.0;
    double t1 = 0.0;
};

struct SleepReport {
    double bedtime = 0.0;
    double wake_time = 0.0;
    std::vector<double> interruptions;  // strictly between bedtime and wake_time
    std::vector<Event> events;          // the events inside the window
};

struct SleepInference {
    std::optional<SleepReport> report;
    std::string reason;  // set when there is no report
};

/// First event in the window is bedtime, the last is wake-up, anything in between an interruption.
SleepInference infer_sleep(const std::vector<Event>& events, NightWindow window);

// ===== Camera =====

struct CameraReport {
    std::vector<std::pair<double, double>> streaming_intervals;
    std::vector<double> motion_events;
};

/// High segments become streaming intervals; only events inside Low segments count as motion.
CameraReport infer_camera(const std::vector<ModeSegment>& segments, const std::vector<Event>& events);

// ===== Switch =====

/// Toggle times only. Traffic shows that the switch changed state, never which state it is in.
struct ToggleReport {
    std::vector<double> toggle_times;
};

ToggleReport infer_toggles(const std::vector<Event>& events);

// ===== Voice assistant =====

struct InteractionReport {
    std::vector<double> interaction_times;
    StreamKey selected_stream;
};

struct InteractionCandidate {
    StreamKey key;
    RateSeries series;
};

/// Coefficient of variation of the gaps between consecutive times; +inf with fewer than two gaps.
double gap_cv(const std::vector<double>& times);

/// Runs spike detection on every candidate and keeps the one with the most
/// events, preferring the most regular spacing on ties.
std::optional<InteractionReport> infer_interactions(const std::vector<InteractionCandidate>& candidates,
                                                    RateDirection direction, const SpikeConfig& config);

}  // namespace hometap
