#include "hometap/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hometap/ingest.hpp"
#include "json.hpp"

namespace hometap {

namespace {

constexpr double kSecondsPerDay = 86400.0;

std::optional<int> parse_hhmm(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    int h = 0, m = 0;
    auto hs = text.substr(0, colon), ms = text.substr(colon + 1);
    auto r1 = std::from_chars(hs.data(), hs.data() + hs.size(), h);
    auto r2 = std::from_chars(ms.data(), ms.data() + ms.size(), m);
    if (r1.ec != std::errc{} || r1.ptr != hs.data() + hs.size() || r2.ec != std::errc{} ||
        r2.ptr != ms.data() + ms.size() || hs.empty() || ms.size() != 2 || h < 0 || h > 23 || m < 0 || m > 59) {
        return std::nullopt;
    }
    return h * 60 + m;
}

// Low segments lose `guard` bins on every side that touches a High segment:
// the smoothing window would otherwise see the mode edge as a spike.
std::vector<Event> low_segment_events(const RateSeries& series, const std::vector<ModeSegment>& segments,
                                      RateDirection direction, const SpikeConfig& spikes) {
    std::vector<Event> events;
    std::size_t guard = spikes.smooth_half_width + 1;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.mode != Mode::Low) continue;
        std::size_t first = s.first_bin + (i > 0 ? guard : 0);
        std::size_t end = s.end_bin - std::min(s.end_bin - s.first_bin, i + 1 < segments.size() ? guard : 0);
        if (first >= end) continue;
        auto found = detect_spikes(series.slice(first, end), direction, spikes);
        events.insert(events.end(), found.begin(), found.end());
    }
    return events;
}

nlohmann::ordered_json key_json(const StreamKey& k) {
    return {{"id", k.id()},
            {"remote_ip", k.remote_ip.to_string()},
            {"remote_port", k.remote_port},
            {"local_port", k.local_port},
            {"transport", std::string(to_string(k.transport))}};
}

std::string fmt_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", t);
    return buf;
}

}  // namespace

std::string_view to_string(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::Sleep: return "sleep";
        case ProfileKind::Camera: return "camera";
        case ProfileKind::Toggle: return "toggle";
        case ProfileKind::Interaction: break;
    }
    return "interaction";
}

std::map<std::string, ProfileKind> default_profiles() {
    return {{"Sense Sleep Monitor", ProfileKind::Sleep},
            {"Nest Security Camera", ProfileKind::Camera},
            {"WeMo Switch", ProfileKind::Toggle},
            {"Amazon Echo", ProfileKind::Interaction}};
}

std::optional<NightWindowSpec> NightWindowSpec::parse(std::string_view text) {
    auto dash = text.find('-');
    if (dash == std::string_view::npos) return std::nullopt;
    auto start = parse_hhmm(text.substr(0, dash));
    auto end = parse_hhmm(text.substr(dash + 1));
    if (!start || !end || *start == *end) return std::nullopt;
    NightWindowSpec spec;
    spec.start_minute = *start;
    spec.end_minute = *end;
    return spec;
}

std::string NightWindowSpec::to_string() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", start_minute / 60, start_minute % 60, end_minute / 60,
                  end_minute % 60);
    return buf;
}

std::vector<NightWindow> night_windows(const NightWindowSpec& spec, double t0, double t1) {
    std::vector<NightWindow> out;
    double offset = spec.utc_offset_minutes * 60.0;
    double wrap = spec.end_minute <= spec.start_minute ? kSecondsPerDay : 0.0;
    auto day_of = [&](double t) { return std::floor((t + offset) / kSecondsPerDay); };
    for (double day = day_of(t0) - 1; day <= day_of(t1); day += 1) {
        double midnight = day * kSecondsPerDay - offset;
        NightWindow w{midnight + spec.start_minute * 60.0, midnight + spec.end_minute * 60.0 + wrap};
        if (w.t1 >= t0 && w.t0 <= t1) out.push_back(w);
    }
    return out;
}

ActivityReport run_pipeline(const Trace& input, const PipelineConfig& config) {
    ActivityReport report;
    auto trace = tag_direction(validate_trace(input), config.home_subnet);
    auto dns = extract_dns(trace);
    auto separated = separate_streams(trace);
    auto labeled = label_streams(std::move(separated.streams), build_ip_domain_map(dns), config.fingerprints,
                                 config.labeling);

    auto& c = report.counters;
    c.packets = trace.size();
    c.unknown_direction = separated.unknown_direction;
    c.dns_observations = dns.observations.size();
    c.resolver_lookups = labeled.lookups;
    c.resolver_failures = labeled.failures;

    std::map<std::string, std::vector<InteractionCandidate>> interaction_streams;
    for (auto& stream : labeled.streams) {
        StreamReport sr;
        sr.key = stream.key;
        sr.label = stream.label.value_or(DeviceLabel{});
        sr.stats = stream_stats(stream);
        sr.series = compute_rate_series(stream, config.window_us, aligned_span(stream, config.window_us));
        stream.packets.clear();
        stream.packets.shrink_to_fit();
        if (!sr.label.unknown()) ++c.labeled_streams;

        auto profile = config.profiles.find(sr.label.device);
        if (!sr.label.unknown() && profile != config.profiles.end() && !sr.series.empty()) {
            const auto& series = sr.series;
            switch (profile->second) {
                case ProfileKind::Sleep: {
                    auto events = detect_spikes(series, config.direction, config.spikes);
                    for (const auto& w : night_windows(config.night, series.start(), series.end())) {
                        report.sleep.push_back(SleepFinding{sr.key, sr.label.device, w, infer_sleep(events, w)});
                    }
                    break;
                }
                case ProfileKind::Camera: {
                    auto segments = classify_bimodal(series, config.direction, config.bimodal);
                    auto events = low_segment_events(series, segments, config.direction, config.spikes);
                    report.camera.push_back(CameraFinding{sr.key, sr.label.device, series.start(), series.end(),
                                                          infer_camera(segments, events)});
                    break;
                }
                case ProfileKind::Toggle:
                    report.toggles.push_back(ToggleFinding{
                        sr.key, sr.label.device, infer_toggles(detect_spikes(series, config.direction, config.spikes))});
                    break;
                case ProfileKind::Interaction:
                    interaction_streams[sr.label.device].push_back(InteractionCandidate{sr.key, series});
                    break;
            }
        }
        report.streams.push_back(std::move(sr));
    }
    for (const auto& [device, candidates] : interaction_streams) {
        if (auto r = infer_interactions(candidates, config.direction, config.spikes)) {
            report.interactions.push_back(InteractionFinding{device, candidates.size(), std::move(*r)});
        }
    }
    return report;
}

std::vector<TruthEntry> report_events(const ActivityReport& report) {
    std::vector<TruthEntry> out;
    for (const auto& f : report.sleep) {
        if (!f.inference.report) continue;
        const auto& r = *f.inference.report;
        out.push_back({r.bedtime, f.device, activity::kBedtime});
        for (double t : r.interruptions) out.push_back({t, f.device, activity::kInterruption});
        out.push_back({r.wake_time, f.device, activity::kWake});
    }
    for (const auto& f : report.camera) {
        for (const auto& [t0, t1] : f.report.streaming_intervals) {
            if (t0 > f.series_start) out.push_back({t0, f.device, activity::kStreamStart});
            if (t1 < f.series_end) out.push_back({t1, f.device, activity::kStreamStop});
        }
        for (double t : f.report.motion_events) out.push_back({t, f.device, activity::kMotion});
    }
    for (const auto& f : report.toggles) {
        for (double t : f.report.toggle_times) out.push_back({t, f.device, activity::kToggle});
    }
    for (const auto& f : report.interactions) {
        for (double t : f.report.interaction_times) out.push_back({t, f.device, activity::kInteraction});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return out;
}

std::string report_to_json(const ActivityReport& report) {
    using nlohmann::ordered_json;
    ordered_json streams = ordered_json::array();
    for (const auto& s : report.streams) {
        ordered_json entry = key_json(s.key);
        entry["label"] = {{"device", s.label.device},
                          {"manufacturer", s.label.manufacturer},
                          {"confidence", s.label.confidence},
                          {"matched_domains", s.label.matched_domains}};
        entry["stats"] = {{"packets", s.stats.packets},
                          {"send_bytes", s.stats.send_bytes},
                          {"recv_bytes", s.stats.recv_bytes},
                          {"first", s.stats.first},
                          {"last", s.stats.last}};
        double peak_send = 0, peak_recv = 0;
        for (double v : s.series.send_rate) peak_send = std::max(peak_send, v);
        for (double v : s.series.recv_rate) peak_recv = std::max(peak_recv, v);
        entry["rates"] = {{"bins", s.series.size()},
                          {"window", s.series.window()},
                          {"peak_send_Bps", peak_send},
                          {"peak_recv_Bps", peak_recv}};
        streams.push_back(std::move(entry));
    }

    ordered_json findings = ordered_json::array();
    for (const auto& f : report.sleep) {
        ordered_json j{{"type", "sleep"}, {"stream", f.stream.id()}, {"device", f.device},
                       {"night_window", {f.window.t0, f.window.t1}}};
        if (const auto& r = f.inference.report) {
            j["bedtime"] = r->bedtime;
            j["interruptions"] = r->interruptions;
            j["wake_time"] = r->wake_time;
            j["events"] = r->events.size();
        } else {
            j["reason"] = f.inference.reason;
        }
        findings.push_back(std::move(j));
    }
    for (const auto& f : report.camera) {
        ordered_json intervals = ordered_json::array();
        for (const auto& [t0, t1] : f.report.streaming_intervals) intervals.push_back({t0, t1});
        findings.push_back({{"type", "camera"},
                            {"stream", f.stream.id()},
                            {"device", f.device},
                            {"streaming_intervals", intervals},
                            {"motion_events", f.report.motion_events}});
    }
    for (const auto& f : report.toggles) {
        findings.push_back({{"type", "toggle"},
                            {"stream", f.stream.id()},
                            {"device", f.device},
                            {"toggle_times", f.report.toggle_times}});
    }
    for (const auto& f : report.interactions) {
        findings.push_back({{"type", "interaction"},
                            {"stream", f.report.selected_stream.id()},
                            {"device", f.device},
                            {"candidates", f.candidates},
                            {"interaction_times", f.report.interaction_times}});
    }

    const auto& c = report.counters;
    ordered_json doc{{"streams", streams},
                     {"findings", findings},
                     {"counters",
                      {{"packets", c.packets},
                       {"unknown_direction", c.unknown_direction},
                       {"dns_observations", c.dns_observations},
                       {"labeled_streams", c.labeled_streams},
                       {"resolver_lookups", c.resolver_lookups},
                       {"resolver_failures", c.resolver_failures}}}};
    return doc.dump(2) + "\n";
}

std::vector<std::string> summary_lines(const ActivityReport& report) {
    std::vector<std::string> lines;
    for (const auto& f : report.sleep) {
        if (const auto& r = f.inference.report) {
            lines.push_back("sleep " + f.stream.id() + ": bed " + fmt_time(r->bedtime) + ", wake " +
                            fmt_time(r->wake_time) + ", " + std::to_string(r->interruptions.size()) +
                            " interruption(s)");
        } else {
            lines.push_back("sleep " + f.stream.id() + ": no report, " + f.inference.reason);
        }
    }
    for (const auto& f : report.camera) {
        lines.push_back("camera " + f.stream.id() + ": " + std::to_string(f.report.streaming_intervals.size()) +
                        " streaming interval(s), " + std::to_string(f.report.motion_events.size()) +
                        " motion event(s)");
    }
    for (const auto& f : report.toggles) {
        lines.push_back("toggle " + f.stream.id() + ": " + std::to_string(f.report.toggle_times.size()) +
                        " toggle(s)");
    }
    for (const auto& f : report.interactions) {
        lines.push_back("interaction " + f.report.selected_stream.id() + ": " +
                        std::to_string(f.report.interaction_times.size()) + " interaction(s) across " +
                        std::to_string(f.candidates) + " candidate stream(s)");
    }
    return lines;
}

std::string rates_csv(const ActivityReport& report) {
    std::string out = "stream_id,t,send_Bps,recv_Bps\n";
    char buf[128];
    for (const auto& s : report.streams) {
        auto id = s.key.id();
        for (std::size_t i = 0; i < s.series.size(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", s.series.bin_start(i), s.series.send_rate[i],
                          s.series.recv_rate[i]);
            out += id;
            out += buf;
        }
    }
    return out;
}

}  // namespace hometap
