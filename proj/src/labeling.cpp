#include "hometap/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <set>
#include <thread>

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include "hometap/default_fingerprints.hpp"
#include "json.hpp"

namespace hometap {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, resume = 0;
    while (t < text.size()) {
        if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = t;
        } else if (p < pattern.size() && pattern[p] == text[t]) {
            ++p;
            ++t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace

// ===== Fingerprint database =====

FingerprintDb load_fingerprints(std::string_view json_text) {
    using nlohmann::json;
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw InputError("fingerprints: not a JSON object");
    if (!doc.contains("entries") || !doc["entries"].is_array()) {
        throw InputError("fingerprints: missing 'entries' array");
    }
    FingerprintDb db;
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& e : doc["entries"]) {
        auto where = "fingerprints: entry " + std::to_string(index++);
        if (!e.is_object() || !e.contains("device") || !e["device"].is_string()) {
            throw InputError(where + ": missing 'device'");
        }
        FingerprintEntry entry;
        entry.device = e["device"].get<std::string>();
        where += " ('" + entry.device + "')";
        if (entry.device.empty()) throw InputError(where + ": empty device name");
        if (!seen.insert(entry.device).second) throw InputError(where + ": duplicate device name");
        entry.manufacturer = e.value("manufacturer", "");
        entry.notes = e.value("notes", "");
        if (!e.contains("patterns") || !e["patterns"].is_array()) throw InputError(where + ": missing 'patterns'");
        for (const auto& p : e["patterns"]) {
            if (!p.is_string()) throw InputError(where + ": pattern is not a string");
            auto pattern = lowercase(p.get<std::string>());
            if (pattern.empty()) throw InputError(where + ": empty pattern");
            entry.patterns.push_back(std::move(pattern));
        }
        db.entries.push_back(std::move(entry));
    }
    return db;
}

std::string default_fingerprints_json() { return detail::kDefaultFingerprintsJson; }

FingerprintDb default_fingerprints() { return load_fingerprints(detail::kDefaultFingerprintsJson); }

std::string dump_fingerprints(const FingerprintDb& db) {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : db.entries) {
        entries.push_back({{"device", e.device},
                           {"manufacturer", e.manufacturer},
                           {"patterns", e.patterns},
                           {"notes", e.notes}});
    }
    return nlohmann::ordered_json{{"entries", entries}}.dump(2);
}

PatternKind classify_pattern(std::string_view pattern) {
    auto star = pattern.find('*');
    if (star == std::string_view::npos) return PatternKind::Suffix;
    if (star == 0 && pattern.size() > 2 && pattern[1] == '.' && pattern.find('*', 1) == std::string_view::npos) {
        return PatternKind::Subdomain;
    }
    return PatternKind::Infix;
}

bool pattern_matches(std::string_view pattern, std::string_view domain) {
    if (classify_pattern(pattern) == PatternKind::Suffix) {
        if (domain == pattern) return true;
        return domain.size() > pattern.size() && domain.ends_with(pattern) &&
               domain[domain.size() - pattern.size() - 1] == '.';
    }
    return glob_match(pattern, domain);
}

DeviceLabel match_fingerprint(const std::vector<std::string>& domains, const FingerprintDb& db) {
    std::set<std::string> unique(domains.begin(), domains.end());
    const FingerprintEntry* best = nullptr;
    std::vector<std::string> best_hits;
    bool best_infix_only = false;
    for (const auto& entry : db.entries) {
        std::vector<std::string> hits;
        bool infix_only = true;
        for (const auto& d : unique) {
            bool hit = false;
            for (const auto& p : entry.patterns) {
                if (!pattern_matches(p, d)) continue;
                hit = true;
                if (classify_pattern(p) != PatternKind::Infix) infix_only = false;
            }
            if (hit) hits.push_back(d);
        }
        if (hits.size() > best_hits.size()) {
            best = &entry;
            best_hits = std::move(hits);
            best_infix_only = infix_only;
        }
    }
    if (best == nullptr) return DeviceLabel{};
    DeviceLabel label;
    label.device = best->device;
    label.manufacturer = best->manufacturer;
    label.confidence = std::min(1.0, static_cast<double>(best_hits.size()) / static_cast<double>(unique.size()));
    if (best_infix_only) label.confidence = std::min(label.confidence, kInfixConfidenceCap);
    label.matched_domains = std::move(best_hits);
    return label;
}

// ===== DNS-derived mapping =====

std::vector<std::string> IpDomainMap::domains_for(Ipv4 ip) const {
    std::vector<std::string> out;
    if (auto it = mapping.find(ip); it != mapping.end()) {
        for (const auto& [domain, last_seen] : it->second) out.push_back(domain);
    }
    return out;
}

IpDomainMap build_ip_domain_map(const DnsTable& dns) {
    IpDomainMap map;
    for (const auto& obs : dns.observations) {
        for (const auto& ip : obs.answers) {
            auto& last = map.mapping[ip][obs.query_name];
            last = std::max(last, obs.ts_us);
        }
    }
    return map;
}

// ===== Reverse DNS =====

std::optional<std::string> SystemResolver::reverse_lookup(Ipv4 ip) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(ip.value);
    char host[NI_MAXHOST];
    int rc = getnameinfo(reinterpret_cast<const sockaddr*>(&addr), sizeof addr, host, sizeof host, nullptr, 0,
                         NI_NAMEREQD);
    if (rc != 0) return std::nullopt;
    return std::string(host);
}

LabelingResult label_streams(std::vector<Stream> streams, const IpDomainMap& map, const FingerprintDb& db,
                             const LabelOptions& options) {
    LabelingResult result;
    std::map<Ipv4, std::vector<std::string>> domains;
    for (const auto& s : streams) {
        if (!domains.count(s.key.remote_ip)) domains[s.key.remote_ip] = map.domains_for(s.key.remote_ip);
    }

    if (options.resolver) {
        // Each lookup runs detached so a hung resolver cannot hold up the run
        // past the deadline; the shared_ptrs keep the resolver and promise alive.
        std::map<Ipv4, std::future<std::optional<std::string>>> pending;
        for (auto& [ip, names] : domains) {
            if (!names.empty()) continue;
            auto promise = std::make_shared<std::promise<std::optional<std::string>>>();
            pending.emplace(ip, promise->get_future());
            std::thread([promise, resolver = options.resolver, ip = ip] {
                try {
                    promise->set_value(resolver->reverse_lookup(ip));
                } catch (...) {
                    promise->set_exception(std::current_exception());
                }
            }).detach();
        }
        auto deadline = std::chrono::steady_clock::now() + options.timeout;
        for (auto& [ip, fut] : pending) {
            ++result.lookups;
            std::optional<std::string> name;
            if (fut.wait_until(deadline) == std::future_status::ready) {
                try {
                    name = fut.get();
                } catch (...) {
                }
            }
            if (name && !name->empty()) {
                auto n = lowercase(*name);
                while (!n.empty() && n.back() == '.') n.pop_back();
                domains[ip] = {n};
            } else {
                ++result.failures;
            }
        }
    }

    for (auto& s : streams) s.label = match_fingerprint(domains[s.key.remote_ip], db);
    result.streams = std::move(streams);
    return result;
}

}  // namespace hometap
