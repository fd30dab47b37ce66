#include "hometap/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hometap {

namespace {

Micros floor_div(Micros a, Micros b) {
    Micros q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

double median_of(std::vector<double> v) {
    auto n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double upper = *mid;
    if (n % 2 == 1) return upper;
    double lower = *std::max_element(v.begin(), mid);
    return (lower + upper) / 2.0;
}

}  // namespace

RateSeries compute_rate_series(const Stream& stream, Micros window_us, std::optional<TimeSpan> span) {
    if (window_us <= 0) throw InputError("rate window must be positive");
    RateSeries series;
    series.window_us = window_us;
    std::size_t bins = 0;
    if (span) {
        series.start_us = span->begin;
        if (span->end > span->begin) {
            bins = static_cast<std::size_t>((span->end - span->begin + window_us - 1) / window_us);
        }
    } else if (!stream.packets.empty()) {
        auto [lo, hi] = std::minmax_element(stream.packets.begin(), stream.packets.end(),
                                            [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
        series.start_us = lo->ts_us;
        bins = static_cast<std::size_t>((hi->ts_us - lo->ts_us) / window_us) + 1;
    }
    std::vector<double> send(bins, 0.0), recv(bins, 0.0);
    Micros span_end = series.start_us + window_us * static_cast<Micros>(bins);
    for (const auto& p : stream.packets) {
        if (p.ts_us < series.start_us || p.ts_us >= span_end) continue;
        auto i = static_cast<std::size_t>((p.ts_us - series.start_us) / window_us);
        if (p.direction == Direction::Outbound) send[i] += p.wire_len;
        if (p.direction == Direction::Inbound) recv[i] += p.wire_len;
    }
    double w = micros_to_seconds(window_us);
    for (std::size_t i = 0; i < bins; ++i) {
        send[i] /= w;
        recv[i] /= w;
    }
    series.send_rate = std::move(send);
    series.recv_rate = std::move(recv);
    return series;
}

std::optional<TimeSpan> aligned_span(const Stream& stream, Micros window_us) {
    if (stream.packets.empty()) return std::nullopt;
    auto [lo, hi] = std::minmax_element(stream.packets.begin(), stream.packets.end(),
                                        [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    return TimeSpan{floor_div(lo->ts_us, window_us) * window_us, (floor_div(hi->ts_us, window_us) + 1) * window_us};
}

RateSeries smooth(const RateSeries& series, std::size_t half_width) {
    if (half_width == 0) return series;
    auto average = [half_width](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::size_t lo = i >= half_width ? i - half_width : 0;
            std::size_t hi = std::min(v.size(), i + half_width + 1);
            double sum = 0.0;
            for (std::size_t j = lo; j < hi; ++j) sum += v[j];
            out[i] = sum / static_cast<double>(hi - lo);
        }
        return out;
    };
    RateSeries out = series;
    out.send_rate = average(series.send_rate);
    out.recv_rate = average(series.recv_rate);
    return out;
}

Baseline robust_baseline(std::span<const double> values) {
    if (values.empty()) throw InputError("baseline of an empty series");
    std::vector<double> v(values.begin(), values.end());
    double med = median_of(v);
    for (auto& x : v) x = std::abs(x - med);
    return Baseline{med, median_of(std::move(v))};
}

Baseline baseline(const RateSeries& series, RateDirection direction) {
    auto v = series.values(direction);
    return robust_baseline(v);
}

std::vector<Event> detect_spikes(const RateSeries& series, RateDirection direction, const SpikeConfig& config) {
    std::vector<Event> events;
    if (series.empty()) return events;
    auto raw = series.values(direction);
    auto smoothed = smooth(series, config.smooth_half_width).values(direction);
    auto base = robust_baseline(raw);
    double threshold = std::max(base.median + config.k * base.mad, config.floor);

    auto emit = [&](std::size_t peak) {
        Event e;
        e.time = series.bin_center(peak);
        e.direction = direction;
        e.peak_rate = raw[peak];
        e.magnitude = smoothed[peak] / std::max(base.median, 1.0);
        events.push_back(e);
    };

    std::optional<std::size_t> peak;
    std::size_t last = 0;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        if (!(smoothed[i] > threshold)) continue;
        if (peak && series.bin_center(i) - series.bin_center(last) > config.min_separation) {
            emit(*peak);
            peak.reset();
        }
        if (!peak || raw[i] > raw[*peak]) peak = i;
        last = i;
    }
    if (peak) emit(*peak);
    return events;
}

std::vector<ModeSegment> classify_bimodal(const RateSeries& series, RateDirection direction,
                                          const BimodalConfig& config) {
    std::vector<ModeSegment> segments;
    if (series.empty()) return segments;
    auto v = series.values(direction);
    auto make = [&](std::size_t first, std::size_t end, Mode mode) {
        return ModeSegment{first, end, series.bin_start(first), series.bin_start(end), mode};
    };
    auto single_low = [&] { return std::vector<ModeSegment>{make(0, v.size(), Mode::Low)}; };

    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo)) return single_low();

    std::vector<bool> high(v.size(), false);
    for (int iter = 0; iter < 100; ++iter) {
        double mid = (lo + hi) / 2.0;
        double sum_lo = 0, sum_hi = 0;
        std::size_t n_lo = 0, n_hi = 0;
        bool changed = false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            bool h = v[i] > mid;
            changed |= (h != high[i]) || iter == 0;
            high[i] = h;
            if (h) {
                sum_hi += v[i];
                ++n_hi;
            } else {
                sum_lo += v[i];
                ++n_lo;
            }
        }
        if (n_lo == 0 || n_hi == 0) return single_low();
        lo = sum_lo / static_cast<double>(n_lo);
        hi = sum_hi / static_cast<double>(n_hi);
        if (!changed) break;
    }
    double ratio = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (ratio < config.ratio_threshold) return single_low();

    struct Run {
        std::size_t first, end;
        bool high;
    };
    std::vector<Run> runs;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (runs.empty() || runs.back().high != high[i]) {
            runs.push_back({i, i + 1, high[i]});
        } else {
            runs.back().end = i + 1;
        }
    }
    double w = series.window();
    while (runs.size() > 1) {
        std::size_t shortest = runs.size();
        for (std::size_t r = 0; r < runs.size(); ++r) {
            double dur = static_cast<double>(runs[r].end - runs[r].first) * w;
            if (dur < config.dwell && (shortest == runs.size() || runs[r].end - runs[r].first <
                                                                     runs[shortest].end - runs[shortest].first)) {
                shortest = r;
            }
        }
        if (shortest == runs.size()) break;
        // Flipping a run merges it with both neighbours, which share the opposite mode.
        std::size_t first = shortest > 0 ? shortest - 1 : shortest;
        std::size_t last = std::min(runs.size() - 1, shortest + 1);
        Run merged{runs[first].first, runs[last].end, !runs[shortest].high};
        runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(first),
                   runs.begin() + static_cast<std::ptrdiff_t>(last + 1));
        runs.insert(runs.begin() + static_cast<std::ptrdiff_t>(first), merged);
    }
    for (const auto& r : runs) segments.push_back(make(r.first, r.end, r.high ? Mode::High : Mode::Low));
    return segments;
}

}  // namespace hometap
