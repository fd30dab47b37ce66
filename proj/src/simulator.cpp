#include "hometap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "hometap/dns_wire.hpp"
#include "json.hpp"

namespace hometap {

namespace {

constexpr std::uint32_t kMinPacket = 60;
constexpr std::uint32_t kElevatedPacket = 1200;
constexpr std::uint32_t kBaselineMin = 100;
constexpr std::uint32_t kBaselineMax = 400;
constexpr double kHighModeAckShare = 0.02;

// Conversions are written out instead of using <random> distributions,
// whose output is implementation-defined; traces must match across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint32_t uniform_int(std::uint32_t lo, std::uint32_t hi) {
        return lo + static_cast<std::uint32_t>(engine_() % (std::uint64_t{hi} - lo + 1));
    }
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
    double lognormal(double sigma) { return sigma > 0 ? std::exp(sigma * normal()) : 1.0; }

private:
    std::mt19937_64 engine_;
};

struct Interval {
    double t0, t1;
    bool contains(double t) const { return t >= t0 && t < t1; }
};

std::uint32_t header_bytes(Transport t) {
    switch (t) {
        case Transport::TCP: return 54;
        case Transport::UDP: return 42;
        case Transport::Other: break;
    }
    return 34;
}

class PortAllocator {
public:
    explicit PortAllocator(const NatSpec& nat) : next_(nat.port_lo), hi_(nat.port_hi) {}
    std::uint16_t take() {
        if (next_ > hi_) throw InputError("scenario: NAT port range exhausted");
        return static_cast<std::uint16_t>(next_++);
    }

private:
    std::uint32_t next_;
    std::uint32_t hi_;
};

bool is_stream_toggle(const std::string& a) { return a == activity::kStreamStart || a == activity::kStreamStop; }

std::vector<Interval> high_intervals(const DeviceSpec& d, double duration) {
    std::vector<ScheduledActivity> flips;
    for (const auto& s : d.schedule) {
        if (is_stream_toggle(s.activity)) flips.push_back(s);
    }
    std::stable_sort(flips.begin(), flips.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    std::vector<Interval> out;
    bool open = false;
    double opened = 0.0;
    for (const auto& f : flips) {
        if (f.activity == activity::kStreamStart && !open) open = true, opened = f.t;
        if (f.activity == activity::kStreamStop && open) {
            out.push_back({opened, f.t});
            open = false;
        }
    }
    if (open) out.push_back({opened, duration});
    return out;
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::Sense: return "sense";
        case DeviceKind::Camera: return "camera";
        case DeviceKind::Switch: return "switch";
        case DeviceKind::Echo: break;
    }
    return "echo";
}

std::optional<DeviceKind> device_kind_from_string(std::string_view name) {
    if (name == "sense") return DeviceKind::Sense;
    if (name == "camera") return DeviceKind::Camera;
    if (name == "switch") return DeviceKind::Switch;
    if (name == "echo") return DeviceKind::Echo;
    return std::nullopt;
}

void validate_scenario(const Scenario& s) {
    auto fail = [&](const std::string& why) { throw InputError("scenario '" + s.name + "': " + why); };
    if (!(s.duration > 0) || !std::isfinite(s.duration)) fail("duration must be positive");
    if (s.start_us < 0) fail("start must be non-negative");
    if (!s.nat.home_subnet.contains(s.nat.public_ip)) fail("public_ip must lie inside home_subnet");
    if (s.nat.port_lo == 0 || s.nat.port_lo > s.nat.port_hi) fail("bad NAT port range");
    std::set<std::pair<Ipv4, std::uint16_t>> endpoints;
    std::set<std::string> names;
    for (const auto& d : s.devices) {
        auto where = "device '" + d.name + "': ";
        if (d.name.empty()) fail("device with empty name");
        if (!names.insert(d.name).second) fail(where + "duplicate name");
        if (d.endpoints.empty()) fail(where + "no endpoints");
        if (!(d.baseline_rate >= 0) || !(d.noise >= 0) || !(d.burst_factor >= 1) || !(d.high_rate >= 0)) {
            fail(where + "rates, noise and burst factor must be non-negative (burst factor >= 1)");
        }
        if (!(d.burst_min > 0) || d.burst_max < d.burst_min) fail(where + "bad burst duration range");
        int carriers = 0;
        for (const auto& e : d.endpoints) {
            if (s.nat.home_subnet.contains(e.ip)) fail(where + "endpoint inside the home subnet");
            if (e.transport == Transport::Other) fail(where + "endpoints must be tcp or udp");
            if (e.port == 0) fail(where + "endpoint port 0");
            if (e.chatter_bursts < 0) fail(where + "negative chatter_bursts");
            if (!endpoints.insert({e.ip, e.port}).second) fail(where + "endpoint shared with another flow");
            carriers += e.carries_activity ? 1 : 0;
        }
        if (!d.schedule.empty() && carriers == 0) fail(where + "schedule without an activity endpoint");
        for (const auto& a : d.schedule) {
            if (!(a.t >= 0 && a.t <= s.duration)) fail(where + "activity outside [0, duration]");
            if (a.activity.empty()) fail(where + "empty activity name");
            if (d.kind != DeviceKind::Camera && is_stream_toggle(a.activity)) {
                fail(where + "stream_start/stream_stop only apply to cameras");
            }
        }
    }
}

Simulation generate_trace(const Scenario& scenario) {
    validate_scenario(scenario);
    Simulation sim;
    sim.trace.home_subnet = scenario.nat.home_subnet;
    auto& packets = sim.trace.packets;
    Rng rng(scenario.seed);
    PortAllocator ports(scenario.nat);
    const Micros start = scenario.start_us;
    const auto bins = static_cast<std::size_t>(std::ceil(scenario.duration));
    const Micros end_us = start + seconds_to_micros(scenario.duration);

    auto packet = [&](Micros ts, Direction dir, const Ipv4& remote, std::uint16_t remote_port, std::uint16_t local_port,
                      Transport t, std::uint32_t wire) {
        PacketRecord p;
        p.ts_us = ts;
        p.direction = dir;
        p.transport = t;
        p.local_ip = scenario.nat.public_ip;
        p.remote_ip = remote;
        p.local_port = local_port;
        p.remote_port = remote_port;
        p.wire_len = wire;
        p.payload_len = wire > header_bytes(t) ? wire - header_bytes(t) : 0;
        return p;
    };

    for (std::size_t di = 0; di < scenario.devices.size(); ++di) {
        const auto& dev = scenario.devices[di];

        // Start-up DNS: one query/response pair per endpoint, a millisecond apart.
        for (std::size_t ei = 0; ei < dev.endpoints.size(); ++ei) {
            const auto& ep = dev.endpoints[ei];
            if (ep.domain.empty()) continue;
            Micros ts = start + static_cast<Micros>(di * 64 + ei) * 1000;
            auto port = ports.take();
            DnsAnswer answer{ep.domain, {ep.ip}};
            auto question = static_cast<std::uint32_t>(12 + ep.domain.size() + 2 + 4);
            packets.push_back(packet(ts, Direction::Outbound, scenario.resolver, 53, port, Transport::UDP, 42 + question));
            auto response = packet(ts + 500, Direction::Inbound, scenario.resolver, 53, port, Transport::UDP,
                                   42 + static_cast<std::uint32_t>(dns::encoded_size(answer)));
            response.dns = std::make_shared<const DnsAnswer>(std::move(answer));
            packets.push_back(std::move(response));
        }

        auto high = dev.kind == DeviceKind::Camera ? high_intervals(dev, scenario.duration) : std::vector<Interval>{};
        auto burst_length = [&] { return std::round(dev.burst_min + rng.uniform() * (dev.burst_max - dev.burst_min)); };
        std::vector<Interval> scheduled;
        for (const auto& a : dev.schedule) {
            if (is_stream_toggle(a.activity)) continue;
            scheduled.push_back({a.t, a.t + burst_length()});
        }

        for (const auto& ep : dev.endpoints) {
            auto local_port = ports.take();
            std::vector<Interval> bursts = ep.carries_activity ? scheduled : std::vector<Interval>{};
            for (int c = 0; c < ep.chatter_bursts; ++c) {
                double t = rng.uniform() * std::max(0.0, scenario.duration - dev.burst_max);
                bursts.push_back({t, t + burst_length()});
            }
            for (std::size_t b = 0; b < bins; ++b) {
                double t = static_cast<double>(b);
                bool bursting = std::any_of(bursts.begin(), bursts.end(), [&](const auto& iv) { return iv.contains(t); });
                bool streaming = ep.carries_activity &&
                                 std::any_of(high.begin(), high.end(), [&](const auto& iv) { return iv.contains(t); });
                for (Direction dir : {Direction::Outbound, Direction::Inbound}) {
                    double rate = dev.baseline_rate;
                    bool elevated = bursting || streaming;
                    if (bursting) rate = dev.burst_factor * dev.baseline_rate;
                    if (streaming) {
                        rate = dir == Direction::Outbound ? dev.high_rate
                                                          : dev.baseline_rate + kHighModeAckShare * dev.high_rate;
                    }
                    auto remaining = static_cast<std::uint64_t>(std::llround(rate * rng.lognormal(dev.noise)));
                    Micros bin_start = start + static_cast<Micros>(b) * kMicrosPerSecond;
                    while (remaining >= kMinPacket) {
                        std::uint64_t size = elevated ? kElevatedPacket : rng.uniform_int(kBaselineMin, kBaselineMax);
                        size = std::min(size, remaining);
                        if (remaining - size < kMinPacket) size = remaining;
                        remaining -= size;
                        Micros ts = bin_start + static_cast<Micros>(rng.uniform() * kMicrosPerSecond);
                        if (ts >= end_us) continue;
                        packets.push_back(packet(ts, dir, ep.ip, ep.port, local_port, ep.transport,
                                                 static_cast<std::uint32_t>(size)));
                    }
                }
            }
        }

        for (const auto& a : dev.schedule) {
            sim.truth.entries.push_back({micros_to_seconds(start + seconds_to_micros(a.t)), dev.name, a.activity});
        }
    }

    std::stable_sort(packets.begin(), packets.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    std::stable_sort(sim.truth.entries.begin(), sim.truth.entries.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
    return sim;
}

// ===== Default scenarios =====

namespace {

std::vector<ScheduledActivity> every(double first, double step, int count, const char* what) {
    std::vector<ScheduledActivity> out;
    for (int i = 0; i < count; ++i) out.push_back({first + step * i, what});
    return out;
}

DeviceSpec sense_device() {
    DeviceSpec d;
    d.kind = DeviceKind::Sense;
    d.name = "Sense Sleep Monitor";
    d.baseline_rate = 150;
    d.endpoints = {{"sense-in.hello.is", Ipv4(52, 20, 1, 10), 443, Transport::TCP, true, 0},
                   {"messeji.hello.is", Ipv4(52, 20, 1, 11), 443, Transport::TCP, false, 0}};
    // 12:30 am, 6:30 am and 9:15 am against a 10:40 pm start.
    d.schedule = {{6600, activity::kBedtime}, {28200, activity::kInterruption}, {38100, activity::kWake}};
    return d;
}

DeviceSpec camera_device() {
    DeviceSpec d;
    d.kind = DeviceKind::Camera;
    d.name = "Nest Security Camera";
    d.baseline_rate = 500;
    d.endpoints = {{"nexus.dropcam.com", Ipv4(54, 80, 2, 20), 443, Transport::TCP, true, 0},
                   {"oculus519-vir.dropcam.com", Ipv4(54, 80, 2, 21), 443, Transport::TCP, false, 0}};
    return d;
}

DeviceSpec switch_device() {
    DeviceSpec d;
    d.kind = DeviceKind::Switch;
    d.name = "WeMo Switch";
    d.baseline_rate = 120;
    d.endpoints = {{"prod1-api-xbcs-net-889336557.us-east-1.elb.amazonaws.com", Ipv4(34, 200, 3, 30), 443,
                    Transport::TCP, true, 0},
                   {"prod1-fs-xbcs-net-1101221371.us-east-1.elb.amazonaws.com", Ipv4(34, 200, 3, 31), 443,
                    Transport::TCP, false, 0}};
    d.schedule = every(120, 120, 10, activity::kToggle);
    return d;
}

DeviceSpec echo_device() {
    DeviceSpec d;
    d.kind = DeviceKind::Echo;
    d.name = "Amazon Echo";
    d.baseline_rate = 150;
    d.endpoints = {{"pindorama.amazon.com", Ipv4(52, 94, 4, 40), 443, Transport::TCP, true, 0},
                   {"device-metrics-us.amazon.com", Ipv4(52, 94, 4, 41), 443, Transport::TCP, false, 3},
                   {"audio-ec.spotify.com", Ipv4(35, 186, 5, 50), 443, Transport::TCP, false, 0},
                   {"ntp.amazon.com", Ipv4(52, 94, 4, 42), 123, Transport::UDP, false, 0}};
    // Three questions asked three times, one every two minutes.
    d.schedule = every(120, 120, 9, activity::kInteraction);
    return d;
}

Scenario base(std::string name, double duration, std::uint64_t seed) {
    Scenario s;
    s.name = std::move(name);
    s.duration = duration;
    s.seed = seed;
    s.start_us = kDefaultScenarioStart;
    return s;
}

}  // namespace

std::vector<Scenario> default_scenarios(std::uint64_t seed) {
    std::vector<Scenario> out;

    auto sense = base("sense-night", 12 * 3600, seed);
    sense.devices = {sense_device()};
    out.push_back(sense);

    auto alternating = base("camera-alternating", 1320, seed);
    auto cam = camera_device();
    for (int i = 0; i < 5; ++i) {
        cam.schedule.push_back({120.0 + 240 * i, activity::kStreamStart});
        cam.schedule.push_back({240.0 + 240 * i, activity::kStreamStop});
    }
    alternating.devices = {cam};
    out.push_back(alternating);

    auto motion = base("camera-motion", 1320, seed);
    cam = camera_device();
    cam.schedule = every(120, 120, 10, activity::kMotion);
    motion.devices = {cam};
    out.push_back(motion);

    auto toggles = base("switch-toggle", 1320, seed);
    toggles.devices = {switch_device()};
    out.push_back(toggles);

    auto echo = base("echo-qa", 1200, seed);
    echo.devices = {echo_device()};
    out.push_back(echo);

    auto composite = base("composite", 12 * 3600, seed);
    cam = camera_device();
    cam.schedule = {{120, activity::kStreamStart}, {240, activity::kStreamStop},
                    {360, activity::kStreamStart}, {480, activity::kStreamStop}};
    for (auto& m : every(600, 120, 5, activity::kMotion)) cam.schedule.push_back(m);
    composite.devices = {sense_device(), cam, switch_device(), echo_device()};
    out.push_back(composite);
    return out;
}

std::vector<std::string> default_scenario_names() {
    std::vector<std::string> names;
    for (const auto& s : default_scenarios()) names.push_back(s.name);
    return names;
}

std::optional<Scenario> find_default_scenario(std::string_view name, std::uint64_t seed) {
    for (auto& s : default_scenarios(seed)) {
        if (s.name == name) return s;
    }
    return std::nullopt;
}

// ===== JSON =====

namespace {

Ipv4 ip_from(const nlohmann::json& j, const char* what) {
    auto ip = j.is_string() ? Ipv4::parse(j.get<std::string>()) : std::nullopt;
    if (!ip) throw InputError(std::string("scenario: bad IPv4 in '") + what + "'");
    return *ip;
}

}  // namespace

Scenario scenario_from_json(std::string_view text) {
    using nlohmann::json;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw InputError("scenario: not a JSON object");
    try {
        Scenario s;
        s.name = doc.value("name", "custom");
        s.duration = doc.at("duration").get<double>();
        s.seed = doc.value("seed", std::uint64_t{42});
        s.start_us = seconds_to_micros(doc.value("start", micros_to_seconds(kDefaultScenarioStart)));
        if (doc.contains("resolver")) s.resolver = ip_from(doc["resolver"], "resolver");
        if (doc.contains("nat")) {
            const auto& nat = doc["nat"];
            if (nat.contains("public_ip")) s.nat.public_ip = ip_from(nat["public_ip"], "nat.public_ip");
            if (nat.contains("home_subnet")) {
                auto cidr = Cidr::parse(nat["home_subnet"].get<std::string>());
                if (!cidr) throw InputError("scenario: bad 'nat.home_subnet'");
                s.nat.home_subnet = *cidr;
            }
            if (nat.contains("port_range")) {
                s.nat.port_lo = nat["port_range"].at(0).get<std::uint16_t>();
                s.nat.port_hi = nat["port_range"].at(1).get<std::uint16_t>();
            }
        }
        for (const auto& dj : doc.value("devices", json::array())) {
            DeviceSpec d;
            auto kind = device_kind_from_string(dj.at("kind").get<std::string>());
            if (!kind) throw InputError("scenario: unknown device kind '" + dj["kind"].get<std::string>() + "'");
            d.kind = *kind;
            d.name = dj.at("name").get<std::string>();
            d.baseline_rate = dj.value("baseline_rate", d.baseline_rate);
            d.noise = dj.value("noise", d.noise);
            d.burst_factor = dj.value("burst_factor", d.burst_factor);
            if (dj.contains("burst_duration")) {
                d.burst_min = dj["burst_duration"].at(0).get<double>();
                d.burst_max = dj["burst_duration"].at(1).get<double>();
            }
            d.high_rate = dj.value("high_rate", d.high_rate);
            for (const auto& ej : dj.at("endpoints")) {
                EndpointSpec e;
                e.domain = ej.value("domain", "");
                e.ip = ip_from(ej.at("ip"), "endpoint.ip");
                e.port = ej.value("port", std::uint16_t{443});
                auto t = transport_from_string(ej.value("transport", "tcp"));
                if (!t) throw InputError("scenario: bad endpoint transport");
                e.transport = *t;
                e.carries_activity = ej.value("carries_activity", false);
                e.chatter_bursts = ej.value("chatter_bursts", 0);
                d.endpoints.push_back(std::move(e));
            }
            for (const auto& aj : dj.value("schedule", json::array())) {
                d.schedule.push_back({aj.at("t").get<double>(), aj.at("activity").get<std::string>()});
            }
            s.devices.push_back(std::move(d));
        }
        validate_scenario(s);
        return s;
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario: ") + e.what());
    }
}

std::string scenario_to_json(const Scenario& s) {
    using nlohmann::ordered_json;
    ordered_json devices = ordered_json::array();
    for (const auto& d : s.devices) {
        ordered_json endpoints = ordered_json::array();
        for (const auto& e : d.endpoints) {
            endpoints.push_back({{"domain", e.domain},
                                 {"ip", e.ip.to_string()},
                                 {"port", e.port},
                                 {"transport", std::string(to_string(e.transport))},
                                 {"carries_activity", e.carries_activity},
                                 {"chatter_bursts", e.chatter_bursts}});
        }
        ordered_json schedule = ordered_json::array();
        for (const auto& a : d.schedule) schedule.push_back({{"t", a.t}, {"activity", a.activity}});
        devices.push_back({{"kind", std::string(to_string(d.kind))},
                           {"name", d.name},
                           {"baseline_rate", d.baseline_rate},
                           {"noise", d.noise},
                           {"burst_factor", d.burst_factor},
                           {"burst_duration", {d.burst_min, d.burst_max}},
                           {"high_rate", d.high_rate},
                           {"endpoints", endpoints},
                           {"schedule", schedule}});
    }
    ordered_json doc{{"name", s.name},
                     {"duration", s.duration},
                     {"seed", s.seed},
                     {"start", micros_to_seconds(s.start_us)},
                     {"resolver", s.resolver.to_string()},
                     {"nat",
                      {{"public_ip", s.nat.public_ip.to_string()},
                       {"home_subnet", s.nat.home_subnet.to_string()},
                       {"port_range", {s.nat.port_lo, s.nat.port_hi}}}},
                     {"devices", devices}};
    return doc.dump(2) + "\n";
}

std::string truth_to_json(const GroundTruth& truth) {
    using nlohmann::ordered_json;
    ordered_json entries = ordered_json::array();
    for (const auto& e : truth.entries) entries.push_back({{"t", e.t}, {"device", e.device}, {"activity", e.activity}});
    return ordered_json{{"entries", entries}}.dump(2) + "\n";
}

GroundTruth truth_from_json(std::string_view text) {
    using nlohmann::json;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
        throw InputError("truth: expected {\"entries\": [...]}");
    }
    GroundTruth truth;
    try {
        for (const auto& e : doc["entries"]) {
            truth.entries.push_back(
                {e.at("t").get<double>(), e.at("device").get<std::string>(), e.at("activity").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("truth: ") + e.what());
    }
    std::stable_sort(truth.entries.begin(), truth.entries.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return truth;
}

}  // namespace hometap
