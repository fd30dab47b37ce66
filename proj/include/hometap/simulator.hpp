#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hometap/model.hpp"

namespace hometap {

enum class DeviceKind { Sense, Camera, Switch, Echo };

std::string_view to_string(DeviceKind kind);
std::optional<DeviceKind> device_kind_from_string(std::string_view name);

struct EndpointSpec {
    std::string domain;
    Ipv4 ip;
    std::uint16_t port = 443;
    Transport transport = Transport::TCP;
    bool carries_activity = false;  // scheduled bursts and camera modes land here
    int chatter_bursts = 0;         // unscheduled bursts at random times (not in ground truth)
};

struct ScheduledActivity {
    double t = 0.0;  // seconds from scenario start
    std::string activity;
};

struct DeviceSpec {
    DeviceKind kind = DeviceKind::Sense;
    std::string name;  // ground-truth device name; matches the fingerprint db
    std::vector<EndpointSpec> endpoints;
    double baseline_rate = 150.0;  // bytes/s per direction per endpoint
    double noise = 0.2;            // sigma of the per-bin log-normal factor
    double burst_factor = 40.0;
    double burst_min = 5.0;  // seconds
    double burst_max = 15.0;
    double high_rate = 1e6;  // camera live-streaming upload, bytes/s
    std::vector<ScheduledActivity> schedule;
};

struct NatSpec {
    Ipv4 public_ip{10, 0, 0, 1};
    Cidr home_subnet{Ipv4(10, 0, 0, 0), 24};
    std::uint16_t port_lo = 40000;
    std::uint16_t port_hi = 60999;
};

struct Scenario {
    std::string name;
    double duration = 0.0;  // seconds
    std::uint64_t seed = 42;
    Micros start_us = 0;
    Ipv4 resolver{8, 8, 8, 8};
    NatSpec nat;
    std::vector<DeviceSpec> devices;
};

struct Simulation {
    Trace trace;  // direction-tagged, as seen at the WAN tap
    GroundTruth truth;
};

/// Throws InputError describing the first violated constraint.
void validate_scenario(const Scenario& scenario);

/// Deterministic in (scenario, seed).
Simulation generate_trace(const Scenario& scenario);

/// sense-night, camera-alternating, camera-motion, switch-toggle, echo-qa, composite.
std::vector<Scenario> default_scenarios(std::uint64_t seed = 42);
std::vector<std::string> default_scenario_names();
std::optional<Scenario> find_default_scenario(std::string_view name, std::uint64_t seed = 42);

/// 2016-11-01 22:40:00 UTC, the start of every default scenario.
inline constexpr Micros kDefaultScenarioStart = 1'478'040'000LL * kMicrosPerSecond;

Scenario scenario_from_json(std::string_view text);
std::string scenario_to_json(const Scenario& scenario);

/// {"entries": [{"t", "device", "activity"}]}
std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(std::string_view text);

}  // namespace hometap
