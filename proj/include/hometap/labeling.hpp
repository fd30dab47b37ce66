#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hometap/ingest.hpp"
#include "hometap/model.hpp"

namespace hometap {

// ===== Fingerprint database =====

struct FingerprintEntry {
    std::string device;
    std::string manufacturer;
    std::vector<std::string> patterns;
    std::string notes;
};

struct FingerprintDb {
    std::vector<FingerprintEntry> entries;
};

/// Parses {"entries": [{"device", "manufacturer", "patterns", "notes"}]}.
/// Throws InputError naming the entry on duplicate devices or empty patterns.
FingerprintDb load_fingerprints(std::string_view json_text);
FingerprintDb default_fingerprints();
std::string default_fingerprints_json();
std::string dump_fingerprints(const FingerprintDb& db);

enum class PatternKind {
    Suffix,     // "dropcam.com": the name itself or any subdomain
    Subdomain,  // "*.hello.is": strict subdomains only
    Infix,      // any other use of '*', e.g. "*xbcs*.amazonaws.com"
};

PatternKind classify_pattern(std::string_view pattern);
bool pattern_matches(std::string_view pattern, std::string_view domain);

/// Labels whose every hit came from infix patterns never exceed this confidence.
inline constexpr double kInfixConfidenceCap = 0.5;

DeviceLabel match_fingerprint(const std::vector<std::string>& domains, const FingerprintDb& db);

// ===== DNS-derived mapping =====

struct IpDomainMap {
    std::map<Ipv4, std::map<std::string, Micros>> mapping;  // ip -> domain -> last seen

    std::vector<std::string> domains_for(Ipv4 ip) const;
};

IpDomainMap build_ip_domain_map(const DnsTable& dns);

// ===== Reverse DNS =====

class ReverseResolver {
public:
    virtual ~ReverseResolver() = default;
    /// PTR name for `ip`, or nullopt when there is none. May throw on failure.
    virtual std::optional<std::string> reverse_lookup(Ipv4 ip) = 0;
};

/// PTR lookups through the system resolver (getnameinfo).
class SystemResolver final : public ReverseResolver {
public:
    std::optional<std::string> reverse_lookup(Ipv4 ip) override;
};

struct LabelOptions {
    std::shared_ptr<ReverseResolver> resolver;  // null disables reverse lookups
    std::chrono::milliseconds timeout{2000};
};

struct LabelingResult {
    std::vector<Stream> streams;
    std::size_t lookups = 0;
    std::size_t failures = 0;  // throws, empty answers and timeouts
};

/// Sets every stream's label from the domains observed for its service IP.
/// IPs without observed DNS get one reverse lookup each (concurrent, cached
/// for the call, bounded by `timeout`).
LabelingResult label_streams(std::vector<Stream> streams, const IpDomainMap& map, const FingerprintDb& db,
                             const LabelOptions& options = {});

}  // namespace hometap
