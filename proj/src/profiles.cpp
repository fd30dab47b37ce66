#include "hometap/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hometap {

SleepInference infer_sleep(const std::vector<Event>& events, NightWindow window) {
    std::vector<Event> inside;
    for (const auto& e : events) {
        if (e.time >= window.t0 && e.time <= window.t1) inside.push_back(e);
    }
    std::sort(inside.begin(), inside.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
    // Equal times cannot bracket an interval.
    inside.erase(std::unique(inside.begin(), inside.end(),
                             [](const Event& a, const Event& b) { return a.time == b.time; }),
                 inside.end());
    if (inside.size() < 2) {
        return {std::nullopt, "fewer than 2 events in the night window (" + std::to_string(inside.size()) + ")"};
    }
    SleepReport r;
    r.bedtime = inside.front().time;
    r.wake_time = inside.back().time;
    for (std::size_t i = 1; i + 1 < inside.size(); ++i) r.interruptions.push_back(inside[i].time);
    r.events = std::move(inside);
    return {std::move(r), {}};
}

CameraReport infer_camera(const std::vector<ModeSegment>& segments, const std::vector<Event>& events) {
    CameraReport r;
    for (const auto& s : segments) {
        if (s.mode != Mode::High) continue;
        if (!r.streaming_intervals.empty() && r.streaming_intervals.back().second >= s.t0) {
            r.streaming_intervals.back().second = std::max(r.streaming_intervals.back().second, s.t1);
        } else {
            r.streaming_intervals.emplace_back(s.t0, s.t1);
        }
    }
    for (const auto& e : events) {
        bool in_low = std::any_of(segments.begin(), segments.end(), [&](const ModeSegment& s) {
            return s.mode == Mode::Low && e.time >= s.t0 && e.time < s.t1;
        });
        bool streaming = std::any_of(r.streaming_intervals.begin(), r.streaming_intervals.end(),
                                     [&](const auto& iv) { return e.time >= iv.first && e.time <= iv.second; });
        if (in_low && !streaming) r.motion_events.push_back(e.time);
    }
    std::sort(r.motion_events.begin(), r.motion_events.end());
    return r;
}

ToggleReport infer_toggles(const std::vector<Event>& events) {
    ToggleReport r;
    for (const auto& e : events) r.toggle_times.push_back(e.time);
    std::sort(r.toggle_times.begin(), r.toggle_times.end());
    return r;
}

double gap_cv(const std::vector<double>& times) {
    if (times.size() < 3) return std::numeric_limits<double>::infinity();
    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    double mean = 0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    if (mean <= 0) return std::numeric_limits<double>::infinity();
    double var = 0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gaps.size());
    return std::sqrt(var) / mean;
}

std::optional<InteractionReport> infer_interactions(const std::vector<InteractionCandidate>& candidates,
                                                    RateDirection direction, const SpikeConfig& config) {
    if (candidates.empty()) return std::nullopt;
    std::optional<InteractionReport> best;
    double best_cv = 0;
    for (const auto& c : candidates) {
        std::vector<double> times;
        for (const auto& e : detect_spikes(c.series, direction, config)) times.push_back(e.time);
        double cv = gap_cv(times);
        bool better = !best || times.size() > best->interaction_times.size() ||
                      (times.size() == best->interaction_times.size() && cv < best_cv);
        if (better) {
            best = InteractionReport{std::move(times), c.key};
            best_cv = cv;
        }
    }
    return best;
}

}  // namespace hometap
