#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hometap/model.hpp"

namespace hometap {

struct TimeSpan {
    Micros begin = 0;  // inclusive
    Micros end = 0;    // exclusive
};

/// Bins wire bytes by direction. Bin i covers [start + i*window, start + (i+1)*window).
/// Without a span the series runs from the first to the last packet of the stream.
RateSeries compute_rate_series(const Stream& stream, Micros window_us, std::optional<TimeSpan> span = std::nullopt);

/// Span covering the stream on a grid aligned to multiples of `window_us`.
std::optional<TimeSpan> aligned_span(const Stream& stream, Micros window_us);

/// Centered moving average over 2*half_width+1 bins, truncated at the edges.
RateSeries smooth(const RateSeries& series, std::size_t half_width);

struct Baseline {
    double median = 0.0;
    double mad = 0.0;
};

Baseline robust_baseline(std::span<const double> values);
/// Median and median absolute deviation of one direction. Throws on an empty series.
Baseline baseline(const RateSeries& series, RateDirection direction);

struct SpikeConfig {
    double k = 5.0;
    double floor = 200.0;          // bytes/s
    double min_separation = 30.0;  // seconds
    std::size_t smooth_half_width = 2;
};

/// A bin spikes when its smoothed rate exceeds max(median + k*mad, floor),
/// with median and MAD taken over the raw bins. Spiking bins closer than
/// `min_separation` merge into one event, placed at the cluster's highest raw bin.
std::vector<Event> detect_spikes(const RateSeries& series, RateDirection direction, const SpikeConfig& config);

enum class Mode { Low, High };

struct ModeSegment {
    std::size_t first_bin = 0;
    std::size_t end_bin = 0;  // exclusive
    double t0 = 0.0;
    double t1 = 0.0;
    Mode mode = Mode::Low;

    double duration() const { return t1 - t0; }
};

struct BimodalConfig {
    double ratio_threshold = 10.0;
    double dwell = 30.0;  // seconds
};

/// Two-cluster split of bin rates. Series whose cluster means differ by less
/// than `ratio_threshold` are a single Low segment; otherwise runs shorter
/// than `dwell` are absorbed into their neighbours.
std::vector<ModeSegment> classify_bimodal(const RateSeries& series, RateDirection direction,
                                          const BimodalConfig& config);

}  // namespace hometap
