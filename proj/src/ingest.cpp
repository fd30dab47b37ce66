#include "hometap/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hometap/dns_wire.hpp"
#include "json.hpp"

namespace hometap {

namespace {

// ===== byte helpers =====

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

std::uint32_t read32(const std::uint8_t* p, bool swapped) {
    std::uint32_t le = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                       (std::uint32_t{p[3]} << 24);
    return swapped ? be32(p) : le;
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}
void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    put_be16(out, static_cast<std::uint16_t>(v >> 16));
    put_be16(out, static_cast<std::uint16_t>(v));
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

constexpr std::size_t kEthHeader = 14;
constexpr std::size_t kIpv4Header = 20;
constexpr std::size_t kTcpHeader = 20;
constexpr std::size_t kUdpHeader = 8;
constexpr std::uint8_t kProtoTcp = 6;
constexpr std::uint8_t kProtoUdp = 17;
constexpr std::uint8_t kProtoOther = 50;  // ESP; anything not tcp/udp reads back as Other

std::size_t l4_header_len(Transport t) {
    switch (t) {
        case Transport::TCP: return kTcpHeader;
        case Transport::UDP: return kUdpHeader;
        case Transport::Other: break;
    }
    return 0;
}

enum class FrameResult { Packet, Skipped, Ipv6 };

// Decodes one Ethernet frame into `out`. `captured` may be shorter than orig_len.
FrameResult decode_frame(std::span<const std::uint8_t> captured, std::uint32_t orig_len, PacketRecord& out,
                         std::size_t& dns_malformed) {
    if (captured.size() < kEthHeader) return FrameResult::Skipped;
    std::size_t off = 12;
    std::uint16_t ethertype = be16(&captured[off]);
    off += 2;
    if (ethertype == 0x8100) {
        if (captured.size() < off + 4) return FrameResult::Skipped;
        ethertype = be16(&captured[off + 2]);
        off += 4;
    }
    if (ethertype == 0x86dd) return FrameResult::Ipv6;
    if (ethertype != 0x0800) return FrameResult::Skipped;

    if (captured.size() < off + kIpv4Header) return FrameResult::Skipped;
    const std::uint8_t* ip = &captured[off];
    if ((ip[0] >> 4) != 4) return FrameResult::Skipped;
    std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    std::size_t total = be16(ip + 2);
    if (ihl < kIpv4Header || total < ihl || captured.size() < off + ihl) return FrameResult::Skipped;
    std::uint16_t frag = be16(ip + 6);
    bool first_fragment = (frag & 0x1fff) == 0;
    std::uint8_t proto = ip[9];

    Transport transport = Transport::Other;
    std::size_t l4 = 0;
    if (first_fragment && proto == kProtoTcp) {
        transport = Transport::TCP;
        if (captured.size() < off + ihl + kTcpHeader) return FrameResult::Skipped;
        l4 = static_cast<std::size_t>(captured[off + ihl + 12] >> 4) * 4;
        if (l4 < kTcpHeader || captured.size() < off + ihl + l4) return FrameResult::Skipped;
    } else if (first_fragment && proto == kProtoUdp) {
        transport = Transport::UDP;
        l4 = kUdpHeader;
        if (captured.size() < off + ihl + l4) return FrameResult::Skipped;
    }
    if (total < ihl + l4) return FrameResult::Skipped;
    std::size_t payload = total - ihl - l4;
    if (orig_len < payload) return FrameResult::Skipped;

    out.direction = Direction::Unknown;
    out.transport = transport;
    out.local_ip = Ipv4(be32(ip + 12));
    out.remote_ip = Ipv4(be32(ip + 16));
    out.local_port = 0;
    out.remote_port = 0;
    if (transport != Transport::Other) {
        out.local_port = be16(&captured[off + ihl]);
        out.remote_port = be16(&captured[off + ihl + 2]);
        if (out.local_port == 0 || out.remote_port == 0) return FrameResult::Skipped;
    }
    out.wire_len = orig_len;
    out.payload_len = static_cast<std::uint32_t>(payload);

    if (transport == Transport::UDP && out.local_port == 53) {
        std::size_t start = off + ihl + l4;
        std::size_t avail = std::min(payload, captured.size() - start);
        auto decoded = dns::decode_response(captured.subspan(start, avail));
        if (decoded.status == dns::Status::Answer) {
            out.dns = std::make_shared<const DnsAnswer>(std::move(decoded.answer));
        } else if (decoded.status == dns::Status::Malformed) {
            ++dns_malformed;
        }
    }
    return FrameResult::Packet;
}

std::string normalize_domain(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    while (!name.empty() && name.back() == '.') name.pop_back();
    return name;
}

}  // namespace

// ===== pcap =====

PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 24) throw InputError("pcap: truncated global header");
    std::uint32_t magic_le = read32(bytes.data(), false);
    bool swapped = false;
    if (magic_le == kPcapMagicMicros) {
        swapped = false;
    } else if (read32(bytes.data(), true) == kPcapMagicMicros) {
        swapped = true;
    } else if (magic_le == kPcapMagicNanos || read32(bytes.data(), true) == kPcapMagicNanos) {
        throw InputError("pcap: nanosecond pcap unsupported");
    } else {
        throw InputError("pcap: unsupported format, magic " + hex32(be32(bytes.data())));
    }
    std::uint32_t linktype = read32(bytes.data() + 20, swapped);
    if (linktype != kLinktypeEthernet) {
        throw InputError("pcap: unsupported linktype " + std::to_string(linktype) + " (only Ethernet)");
    }

    PcapParseResult result;
    std::size_t off = 24;
    while (off < bytes.size()) {
        ++result.records;
        if (bytes.size() - off < 16) {
            ++result.skipped;
            break;
        }
        const std::uint8_t* hdr = bytes.data() + off;
        std::uint32_t ts_sec = read32(hdr, swapped);
        std::uint32_t ts_usec = read32(hdr + 4, swapped);
        std::uint32_t incl = read32(hdr + 8, swapped);
        std::uint32_t orig = read32(hdr + 12, swapped);
        off += 16;
        if (bytes.size() - off < incl) {
            ++result.skipped;
            break;
        }
        auto frame = bytes.subspan(off, incl);
        off += incl;
        if (ts_usec >= 1'000'000) {
            ++result.skipped;
            continue;
        }
        PacketRecord pkt;
        pkt.ts_us = static_cast<Micros>(ts_sec) * kMicrosPerSecond + ts_usec;
        switch (decode_frame(frame, orig, pkt, result.dns_malformed)) {
            case FrameResult::Packet: result.trace.packets.push_back(std::move(pkt)); break;
            case FrameResult::Ipv6: ++result.ipv6_skipped; [[fallthrough]];
            case FrameResult::Skipped: ++result.skipped; break;
        }
    }
    return result;
}

std::vector<std::uint8_t> write_pcap(const Trace& trace) {
    std::vector<std::uint8_t> out;
    put_le32(out, kPcapMagicMicros);
    put_le16(out, 2);
    put_le16(out, 4);
    put_le32(out, 0);
    put_le32(out, 0);
    put_le32(out, 262144);
    put_le32(out, kLinktypeEthernet);

    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        const auto& p = trace.packets[i];
        std::size_t l4 = l4_header_len(p.transport);
        std::size_t ip_total = kIpv4Header + l4 + p.payload_len;
        if (ip_total > 0xffff) throw TraceError(i, "payload too large for an IPv4 frame");
        if (p.wire_len < kEthHeader + ip_total) {
            throw TraceError(i, "wire_len " + std::to_string(p.wire_len) + " smaller than its headers");
        }
        if (p.ts_us < 0 || p.ts_us / kMicrosPerSecond > 0xffffffffLL) throw TraceError(i, "timestamp out of range");

        std::vector<std::uint8_t> dns_bytes;
        if (p.dns) {
            if (p.transport != Transport::UDP || p.src_port() != 53) {
                throw TraceError(i, "dns answer on a packet that is not a udp/53 response");
            }
            dns_bytes = dns::encode_response(*p.dns);
            if (dns_bytes.size() > p.payload_len) throw TraceError(i, "dns answer larger than payload_len");
        }

        put_le32(out, static_cast<std::uint32_t>(p.ts_us / kMicrosPerSecond));
        put_le32(out, static_cast<std::uint32_t>(p.ts_us % kMicrosPerSecond));
        put_le32(out, p.wire_len);
        put_le32(out, p.wire_len);
        std::size_t frame_start = out.size();

        static constexpr std::uint8_t kMacs[12] = {2, 0, 0, 0, 0, 2, 2, 0, 0, 0, 0, 1};
        out.insert(out.end(), std::begin(kMacs), std::end(kMacs));
        put_be16(out, 0x0800);

        std::size_t ip_start = out.size();
        out.push_back(0x45);
        out.push_back(0);
        put_be16(out, static_cast<std::uint16_t>(ip_total));
        put_be16(out, 0);
        put_be16(out, 0x4000);
        out.push_back(64);
        out.push_back(p.transport == Transport::TCP   ? kProtoTcp
                      : p.transport == Transport::UDP ? kProtoUdp
                                                      : kProtoOther);
        put_be16(out, 0);
        put_be32(out, p.src_ip().value);
        put_be32(out, p.dst_ip().value);
        std::uint32_t sum = 0;
        for (std::size_t k = ip_start; k < ip_start + kIpv4Header; k += 2) sum += be16(&out[k]);
        while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
        std::uint16_t checksum = static_cast<std::uint16_t>(~sum);
        out[ip_start + 10] = static_cast<std::uint8_t>(checksum >> 8);
        out[ip_start + 11] = static_cast<std::uint8_t>(checksum);

        if (p.transport == Transport::TCP) {
            put_be16(out, p.src_port());
            put_be16(out, p.dst_port());
            put_be32(out, 0);
            put_be32(out, 0);
            out.push_back(5 << 4);
            out.push_back(0x18);  // PSH|ACK
            put_be16(out, 65535);
            put_be32(out, 0);
        } else if (p.transport == Transport::UDP) {
            put_be16(out, p.src_port());
            put_be16(out, p.dst_port());
            put_be16(out, static_cast<std::uint16_t>(kUdpHeader + p.payload_len));
            put_be16(out, 0);
        }
        out.insert(out.end(), dns_bytes.begin(), dns_bytes.end());
        out.resize(frame_start + p.wire_len, 0);
    }
    return out;
}

// ===== JSONL =====

Trace parse_jsonl(std::string_view text) {
    using nlohmann::json;
    Trace trace;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        auto fail = [&](const std::string& why) -> InputError {
            return InputError("jsonl line " + std::to_string(line_no) + ": " + why);
        };
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw fail("not a JSON object");
        auto field = [&](const char* key) -> const json& {
            auto it = obj.find(key);
            if (it == obj.end()) throw fail(std::string("missing field '") + key + "'");
            return *it;
        };
        auto ip_field = [&](const char* key) {
            const auto& v = field(key);
            auto ip = v.is_string() ? Ipv4::parse(v.get<std::string>()) : std::nullopt;
            if (!ip) throw fail(std::string("bad IPv4 in '") + key + "'");
            return *ip;
        };
        auto uint_field = [&](const char* key, std::uint64_t max) {
            const auto& v = field(key);
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
                throw fail(std::string("'") + key + "' must be a non-negative integer");
            }
            auto n = v.get<std::uint64_t>();
            if (n > max) throw fail(std::string("'") + key + "' out of range");
            return n;
        };

        const auto& ts = field("ts");
        if (!ts.is_number()) throw fail("'ts' must be a number");
        double seconds = ts.get<double>();
        if (!std::isfinite(seconds) || seconds < 0) throw fail("'ts' must be finite and non-negative");

        PacketRecord p;
        p.ts_us = seconds_to_micros(seconds);
        p.local_ip = ip_field("src_ip");
        p.remote_ip = ip_field("dst_ip");
        p.local_port = static_cast<std::uint16_t>(uint_field("src_port", 65535));
        p.remote_port = static_cast<std::uint16_t>(uint_field("dst_port", 65535));
        const auto& proto = field("proto");
        auto transport = proto.is_string() ? transport_from_string(proto.get<std::string>()) : std::nullopt;
        if (!transport) throw fail("'proto' must be tcp, udp or other");
        p.transport = *transport;
        p.wire_len = static_cast<std::uint32_t>(uint_field("wire_len", 0xffffffffu));
        p.payload_len = static_cast<std::uint32_t>(uint_field("payload_len", 0xffffffffu));
        if (p.payload_len > p.wire_len) throw fail("payload_len exceeds wire_len");

        if (auto it = obj.find("dns"); it != obj.end() && !it->is_null()) {
            const auto& d = *it;
            if (!d.is_object() || !d.contains("query") || !d["query"].is_string()) throw fail("bad 'dns' object");
            DnsAnswer answer{normalize_domain(d["query"].get<std::string>()), {}};
            if (answer.query.empty()) throw fail("empty dns query");
            if (d.contains("answers")) {
                if (!d["answers"].is_array()) throw fail("'dns.answers' must be an array");
                for (const auto& a : d["answers"]) {
                    auto ip = a.is_string() ? Ipv4::parse(a.get<std::string>()) : std::nullopt;
                    if (!ip) throw fail("bad IPv4 in 'dns.answers'");
                    answer.answers.push_back(*ip);
                }
            }
            std::sort(answer.answers.begin(), answer.answers.end());
            answer.answers.erase(std::unique(answer.answers.begin(), answer.answers.end()), answer.answers.end());
            p.dns = std::make_shared<const DnsAnswer>(std::move(answer));
        }
        trace.packets.push_back(std::move(p));
    }
    return trace;
}

std::string write_jsonl(const Trace& trace) {
    using nlohmann::ordered_json;
    std::string out;
    for (const auto& p : trace.packets) {
        ordered_json obj;
        obj["ts"] = p.timestamp();
        obj["src_ip"] = p.src_ip().to_string();
        obj["dst_ip"] = p.dst_ip().to_string();
        obj["src_port"] = p.src_port();
        obj["dst_port"] = p.dst_port();
        obj["proto"] = std::string(to_string(p.transport));
        obj["wire_len"] = p.wire_len;
        obj["payload_len"] = p.payload_len;
        if (p.dns) {
            ordered_json answers = ordered_json::array();
            for (const auto& ip : p.dns->answers) answers.push_back(ip.to_string());
            obj["dns"] = {{"query", p.dns->query}, {"answers", answers}};
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

// ===== DNS =====

DnsTable extract_dns(const Trace& trace) {
    DnsTable table;
    for (const auto& p : trace.packets) {
        if (!p.dns || p.dns->answers.empty()) continue;
        table.observations.push_back(DnsObservation{p.ts_us, p.dns->query, p.dns->answers});
    }
    std::sort(table.observations.begin(), table.observations.end(), [](const auto& a, const auto& b) {
        return std::tie(a.ts_us, a.query_name, a.answers) < std::tie(b.ts_us, b.query_name, b.answers);
    });
    return table;
}

DnsTable extract_dns(std::span<const std::uint8_t> pcap_bytes) {
    auto parsed = parse_pcap(pcap_bytes);
    auto table = extract_dns(parsed.trace);
    table.malformed = parsed.dns_malformed;
    return table;
}

// ===== Direction =====

Trace tag_direction(Trace trace, const Cidr& home_subnet) {
    for (auto& p : trace.packets) {
        Ipv4 src = p.src_ip(), dst = p.dst_ip();
        std::uint16_t sport = p.src_port(), dport = p.dst_port();
        bool src_home = home_subnet.contains(src);
        bool dst_home = home_subnet.contains(dst);
        if (src_home && !dst_home) {
            p.direction = Direction::Outbound;
            p.local_ip = src, p.local_port = sport, p.remote_ip = dst, p.remote_port = dport;
        } else if (dst_home && !src_home) {
            p.direction = Direction::Inbound;
            p.local_ip = dst, p.local_port = dport, p.remote_ip = src, p.remote_port = sport;
        } else {
            p.direction = Direction::Unknown;
            p.local_ip = src, p.local_port = sport, p.remote_ip = dst, p.remote_port = dport;
        }
    }
    trace.home_subnet = home_subnet;
    return trace;
}

// ===== Files =====

std::optional<TraceFormat> format_from_name(std::string_view name) {
    if (name == "pcap") return TraceFormat::Pcap;
    if (name == "jsonl") return TraceFormat::Jsonl;
    return std::nullopt;
}

TraceFormat format_from_path(std::string_view path) {
    auto ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".pcap" || ext == ".cap") return TraceFormat::Pcap;
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return TraceFormat::Jsonl;
    throw InputError("cannot infer trace format from '" + std::string(path) + "'; pass --format");
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Trace load_trace(const std::string& path, TraceFormat format) {
    auto bytes = read_file_bytes(path);
    if (format == TraceFormat::Pcap) return parse_pcap(bytes).trace;
    return parse_jsonl(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + path + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("short write to '" + path + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot rename onto '" + path + "': " + ec.message());
}

void write_file_atomic(const std::string& path, std::string_view text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

void save_trace(const std::string& path, const Trace& trace, TraceFormat format) {
    if (format == TraceFormat::Pcap) {
        write_file_atomic(path, write_pcap(trace));
    } else {
        write_file_atomic(path, write_jsonl(trace));
    }
}

}  // namespace hometap
