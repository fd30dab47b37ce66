#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hometap/model.hpp"

namespace hometap {

// ===== pcap =====

inline constexpr std::uint32_t kPcapMagicMicros = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xa1b23c4d;
inline constexpr std::uint32_t kLinktypeEthernet = 1;

struct PcapParseResult {
    Trace trace;
    std::size_t records = 0;        // record headers seen, including truncated ones
    std::size_t skipped = 0;        // non-IPv4, truncated or malformed records
    std::size_t ipv6_skipped = 0;   // subset of `skipped`
    std::size_t dns_malformed = 0;  // port-53 responses whose payload failed to decode
};

/// Parses a classic (microsecond) pcap with Ethernet linktype. Every emitted
/// packet has direction Unknown with `local_*` = source, `remote_*` = destination.
PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes);

/// Serializes a trace as little-endian microsecond pcap. Headers are
/// synthesized from the record fields; payload bytes are zero except for
/// encoded DNS answers. Throws InputError for records that cannot be framed.
std::vector<std::uint8_t> write_pcap(const Trace& trace);

// ===== JSONL =====

/// One packet object per non-empty line. Errors name the 1-based line number.
Trace parse_jsonl(std::string_view text);
std::string write_jsonl(const Trace& trace);

// ===== DNS =====

struct DnsTable {
    std::vector<DnsObservation> observations;  // sorted by (time, name, answers)
    std::size_t malformed = 0;
};

DnsTable extract_dns(const Trace& trace);
DnsTable extract_dns(std::span<const std::uint8_t> pcap_bytes);

// ===== Direction =====

/// Source inside the subnet -> Outbound, destination inside -> Inbound,
/// otherwise Unknown. Records are re-oriented so `local_*` is the home side.
Trace tag_direction(Trace trace, const Cidr& home_subnet);

// ===== Files =====

enum class TraceFormat { Pcap, Jsonl };

TraceFormat format_from_path(std::string_view path);
std::optional<TraceFormat> format_from_name(std::string_view name);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
Trace load_trace(const std::string& path, TraceFormat format);
/// Write-then-rename so readers never see a partial file.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);
void save_trace(const std::string& path, const Trace& trace, TraceFormat format);

}  // namespace hometap
