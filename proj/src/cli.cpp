#include "hometap/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "hometap/defense.hpp"
#include "hometap/ingest.hpp"
#include "hometap/labeling.hpp"
#include "hometap/pipeline.hpp"
#include "hometap/simulator.hpp"
#include "json.hpp"

namespace hometap::cli {

namespace {

struct Options {
    // global
    double window = 1.0;
    double spike_k = SpikeConfig{}.k;
    double spike_floor = SpikeConfig{}.floor;
    double min_separation = SpikeConfig{}.min_separation;
    double ratio_threshold = BimodalConfig{}.ratio_threshold;
    double dwell = BimodalConfig{}.dwell;
    std::string night_window = NightWindowSpec{}.to_string();
    std::uint64_t seed = 42;
    std::string format;
    std::string config;

    // shared by several commands
    std::string input;
    std::string out;
    std::string home_subnet = "10.0.0.0/24";
    std::string fingerprints = "default";

    // analyze
    std::string rates_csv;
    bool reverse_dns = false;
    int reverse_dns_timeout_ms = 2000;

    // simulate
    std::string scenario;
    std::string scenario_file;
    std::string truth;
    bool list = false;
    bool print_scenario = false;

    // shape
    std::string mode;
    double rate = 0.0;
    std::uint32_t mtu = 1400;
    std::string tunnel_remote = "198.51.100.1";
    std::uint16_t tunnel_port = 1194;
    std::uint32_t overhead = 40;

    // evaluate
    std::string original;
    std::string shaped;
    double tolerance = 30.0;

    // fingerprints
    bool check = false;
};

struct Commands {
    CLI::App* analyze = nullptr;
    CLI::App* simulate = nullptr;
    CLI::App* shape = nullptr;
    CLI::App* evaluate = nullptr;
    CLI::App* fingerprints = nullptr;
};

Commands build(CLI::App& app, Options& o) {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");
    app.add_option("--window", o.window, "Rate bin width in seconds")->check(CLI::PositiveNumber);
    app.add_option("--spike-k", o.spike_k, "Spike threshold in MADs above the median");
    app.add_option("--spike-floor", o.spike_floor, "Minimum spike threshold, bytes/s");
    app.add_option("--min-separation", o.min_separation, "Merge spikes closer than this many seconds");
    app.add_option("--ratio-threshold", o.ratio_threshold, "Camera High/Low mean ratio");
    app.add_option("--dwell", o.dwell, "Shortest camera mode run, seconds");
    app.add_option("--night-window", o.night_window, "Local night window HH:MM-HH:MM");
    app.add_option("--seed", o.seed, "Simulator seed");
    app.add_option("--format", o.format, "Input trace format")->check(CLI::IsMember({"pcap", "jsonl"}));
    app.add_option("--config", o.config, "JSON file with default flag values");

    Commands c;
    c.analyze = app.add_subcommand("analyze", "Infer device activity from a trace");
    c.analyze->fallthrough();
    c.analyze->add_option("--input", o.input, "Trace file (.pcap or .jsonl)")->required();
    c.analyze->add_option("--out", o.out, "Report JSON path");
    c.analyze->add_option("--home-subnet", o.home_subnet, "Home-side CIDR");
    c.analyze->add_option("--fingerprints", o.fingerprints, "Fingerprint db path, or 'default'");
    c.analyze->add_option("--rates-csv", o.rates_csv, "Per-stream rate series CSV path");
    c.analyze->add_flag("--reverse-dns", o.reverse_dns, "Reverse-resolve addresses without DNS answers");
    c.analyze->add_option("--reverse-dns-timeout", o.reverse_dns_timeout_ms, "Milliseconds per lookup");

    c.simulate = app.add_subcommand("simulate", "Generate a synthetic trace and its ground truth");
    c.simulate->fallthrough();
    c.simulate->add_option("--scenario", o.scenario, "Built-in scenario name");
    c.simulate->add_option("--scenario-file", o.scenario_file, "Scenario JSON");
    c.simulate->add_option("--out", o.out, "Trace path (.jsonl or .pcap)");
    c.simulate->add_option("--truth", o.truth, "Ground-truth JSON path");
    c.simulate->add_flag("--list", o.list, "List built-in scenarios");
    c.simulate->add_flag("--print-scenario", o.print_scenario, "Print the scenario JSON instead of simulating");

    c.shape = app.add_subcommand("shape", "Apply a traffic defense to a trace");
    c.shape->fallthrough();
    c.shape->add_option("--input", o.input, "Trace file")->required();
    c.shape->add_option("--out", o.out, "Defended trace path")->required();
    c.shape->add_option("--mode", o.mode, "constant-rate or tunnel")->required();
    c.shape->add_option("--rate", o.rate, "Target bytes/s per stream and direction (default: trace peak)");
    c.shape->add_option("--mtu", o.mtu, "Largest padding packet")->check(CLI::PositiveNumber);
    c.shape->add_option("--home-subnet", o.home_subnet, "Home-side CIDR");
    c.shape->add_option("--tunnel-remote", o.tunnel_remote, "Tunnel endpoint address");
    c.shape->add_option("--tunnel-port", o.tunnel_port, "Tunnel endpoint port");
    c.shape->add_option("--overhead", o.overhead, "Encapsulation bytes per packet");

    c.evaluate = app.add_subcommand("evaluate", "Score inference before and after a defense");
    c.evaluate->fallthrough();
    c.evaluate->add_option("--original", o.original, "Undefended trace")->required();
    c.evaluate->add_option("--shaped", o.shaped, "Defended trace")->required();
    c.evaluate->add_option("--truth", o.truth, "Ground-truth JSON")->required();
    c.evaluate->add_option("--out", o.out, "Defense report JSON path");
    c.evaluate->add_option("--home-subnet", o.home_subnet, "Home-side CIDR");
    c.evaluate->add_option("--fingerprints", o.fingerprints, "Fingerprint db path, or 'default'");
    c.evaluate->add_option("--tolerance", o.tolerance, "Event matching tolerance, seconds");

    c.fingerprints = app.add_subcommand("fingerprints", "Print or validate a fingerprint db");
    c.fingerprints->fallthrough();
    c.fingerprints->add_option("--db", o.fingerprints, "Fingerprint db path, or 'default'");
    c.fingerprints->add_option("--out", o.out, "Write the normalized db here");
    c.fingerprints->add_flag("--check", o.check, "Validate only");
    return c;
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return std::nullopt;
}

CLI::Option* find_option(CLI::App& app, const std::string& name) {
    for (auto* sub : app.get_subcommands()) {
        if (auto* opt = sub->get_option_no_throw(name)) return opt;
    }
    return app.get_option_no_throw(name);
}

// Flags missing from the command line are appended from the config document.
std::vector<std::string> with_config(const std::vector<std::string>& args, CLI::App& parsed) {
    auto path = config_path(args);
    if (!path) return args;
    auto bytes = read_file_bytes(*path);
    auto doc = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw InputError("config: '" + *path + "' is not a JSON object");

    std::vector<std::string> merged = args;
    for (const auto& [key, value] : doc.items()) {
        if (key == "config") continue;
        auto* opt = find_option(parsed, "--" + key);
        if (!opt) throw InputError("config: unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        if (value.is_boolean()) {
            if (opt->get_expected_min() != 0) throw InputError("config: '" + key + "' expects a value");
            if (value.get<bool>()) merged.push_back("--" + key);
        } else if (value.is_string()) {
            merged.push_back("--" + key);
            merged.push_back(value.get<std::string>());
        } else if (value.is_number()) {
            merged.push_back("--" + key);
            merged.push_back(value.dump());
        } else {
            throw InputError("config: '" + key + "' must be a string, number or boolean");
        }
    }
    return merged;
}

Cidr parse_subnet(const std::string& text) {
    auto cidr = Cidr::parse(text);
    if (!cidr) throw InputError("bad subnet '" + text + "'");
    return *cidr;
}

FingerprintDb load_db(const std::string& source) {
    if (source == "default") return default_fingerprints();
    auto bytes = read_file_bytes(source);
    return load_fingerprints(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string read_text(const std::string& path) {
    auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

Trace load_input(const std::string& path, const Options& o) {
    auto format = o.format.empty() ? format_from_path(path) : *format_from_name(o.format);
    return load_trace(path, format);
}

PipelineConfig pipeline_config(const Options& o) {
    PipelineConfig config;
    config.home_subnet = parse_subnet(o.home_subnet);
    config.fingerprints = load_db(o.fingerprints);
    config.window_us = seconds_to_micros(o.window);
    if (config.window_us <= 0) throw InputError("window too small");
    config.spikes.k = o.spike_k;
    config.spikes.floor = o.spike_floor;
    config.spikes.min_separation = o.min_separation;
    config.bimodal.ratio_threshold = o.ratio_threshold;
    config.bimodal.dwell = o.dwell;
    auto night = NightWindowSpec::parse(o.night_window);
    if (!night) throw InputError("bad night window '" + o.night_window + "'");
    config.night = *night;
    return config;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    auto config = pipeline_config(o);
    if (o.reverse_dns) {
        config.labeling.resolver = std::make_shared<SystemResolver>();
        config.labeling.timeout = std::chrono::milliseconds(o.reverse_dns_timeout_ms);
    }
    auto report = run_pipeline(load_input(o.input, o), config);
    if (!o.out.empty()) write_file_atomic(o.out, report_to_json(report));
    if (!o.rates_csv.empty()) write_file_atomic(o.rates_csv, rates_csv(report));
    for (const auto& line : summary_lines(report)) out << line << '\n';
    out << report.streams.size() << " streams, " << report.finding_count() << " findings\n";
    return kExitOk;
}

int cmd_simulate(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
    if (o.list) {
        for (const auto& name : default_scenario_names()) out << name << '\n';
        return kExitOk;
    }
    std::optional<Scenario> scenario;
    if (!o.scenario_file.empty()) {
        if (!o.scenario.empty()) throw InputError("give --scenario or --scenario-file, not both");
        scenario = scenario_from_json(read_text(o.scenario_file));
        if (seed_given) scenario->seed = o.seed;
    } else if (!o.scenario.empty()) {
        scenario = find_default_scenario(o.scenario, o.seed);
        if (!scenario) {
            err << "error: unknown scenario '" << o.scenario << "'; available:";
            for (const auto& name : default_scenario_names()) err << ' ' << name;
            err << '\n';
            return kExitUsage;
        }
    } else {
        throw InputError("simulate needs --scenario or --scenario-file");
    }
    if (o.print_scenario) {
        out << scenario_to_json(*scenario);
        return kExitOk;
    }
    if (o.out.empty()) throw InputError("simulate needs --out");

    auto sim = generate_trace(*scenario);
    auto format = o.format.empty() ? format_from_path(o.out) : *format_from_name(o.format);
    save_trace(o.out, sim.trace, format);
    if (!o.truth.empty()) write_file_atomic(o.truth, truth_to_json(sim.truth));
    out << scenario->name << ": " << sim.trace.packets.size() << " packets, " << sim.truth.entries.size()
        << " truth entries\n";
    return kExitOk;
}

int cmd_shape(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.mode != "constant-rate" && o.mode != "tunnel") {
        err << "error: --mode must be constant-rate or tunnel\n";
        return kExitUsage;
    }
    auto subnet = parse_subnet(o.home_subnet);
    auto trace = tag_direction(validate_trace(load_input(o.input, o)), subnet);
    Trace defended;
    if (o.mode == "tunnel") {
        TunnelOptions opts;
        auto remote = Ipv4::parse(o.tunnel_remote);
        if (!remote) throw InputError("bad tunnel address '" + o.tunnel_remote + "'");
        opts.remote = *remote;
        opts.port = o.tunnel_port;
        opts.overhead = o.overhead;
        defended = tunnel_aggregate(trace, opts);
        out << "tunnel: " << defended.packets.size() << " packets\n";
    } else {
        ShapeOptions opts;
        opts.target_rate = o.rate > 0 ? o.rate : peak_stream_rate(trace);
        if (!(opts.target_rate > 0)) throw InputError("cannot shape: no rate given and the trace is empty");
        opts.mtu = o.mtu;
        auto shaped = shape_constant_rate(trace, opts);
        defended = std::move(shaped.trace);
        char line[160];
        std::snprintf(line, sizeof line, "constant-rate %.0f B/s: %llu padding packets, %llu padding bytes, max delay %.1f s\n",
                      opts.target_rate, static_cast<unsigned long long>(shaped.stats.padding_packets),
                      static_cast<unsigned long long>(shaped.stats.padding_bytes), shaped.stats.max_delay);
        out << line;
    }
    defended.home_subnet = subnet;
    save_trace(o.out, defended, format_from_path(o.out));
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    EvaluationConfig config;
    config.pipeline = pipeline_config(o);
    config.tolerance = o.tolerance;
    auto original = load_input(o.original, o);
    auto shaped = load_input(o.shaped, o);
    auto truth = truth_from_json(read_text(o.truth));
    auto report = evaluate_defense(original, shaped, truth, config);
    auto json = defense_report_to_json(report);
    if (o.out.empty()) {
        out << json;
    } else {
        write_file_atomic(o.out, json);
        for (const auto& [device, m] : report.after) {
            const auto& b = report.before.at(device);
            char line[200];
            std::snprintf(line, sizeof line, "%s: recall %.3f -> %.3f, precision %.3f -> %.3f\n", device.c_str(),
                          b.recall, m.recall, b.precision, m.precision);
            out << line;
        }
        char line[64];
        std::snprintf(line, sizeof line, "overhead %.6f\n", report.overhead);
        out << line;
    }
    return kExitOk;
}

int cmd_fingerprints(const Options& o, std::ostream& out) {
    auto db = load_db(o.fingerprints);
    if (o.check) {
        out << "ok: " << db.entries.size() << " entries\n";
        return kExitOk;
    }
    auto text = dump_fingerprints(db);
    if (o.out.empty()) {
        out << text;
    } else {
        write_file_atomic(o.out, text);
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto parse = [&](CLI::App& app, std::vector<std::string> argv) -> std::optional<int> {
        std::reverse(argv.begin(), argv.end());
        try {
            app.parse(argv);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return kExitOk;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return kExitOk;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << '\n';
            return kExitUsage;
        }
        return std::nullopt;
    };

    try {
        Options o;
        auto app = std::make_unique<CLI::App>("Smart-home traffic rate analysis", "hometap");
        auto commands = build(*app, o);
        if (auto code = parse(*app, args)) return *code;
        if (config_path(args)) {
            auto merged = with_config(args, *app);
            o = Options{};
            app = std::make_unique<CLI::App>("Smart-home traffic rate analysis", "hometap");
            commands = build(*app, o);
            if (auto code = parse(*app, merged)) return *code;
        }
        bool seed_given = app->get_option("--seed")->count() > 0;
        if (commands.analyze->parsed()) return cmd_analyze(o, out);
        if (commands.simulate->parsed()) return cmd_simulate(o, seed_given, out, err);
        if (commands.shape->parsed()) return cmd_shape(o, out, err);
        if (commands.evaluate->parsed()) return cmd_evaluate(o, out);
        return cmd_fingerprints(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace hometap::cli
