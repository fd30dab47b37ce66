#include "hometap/net.hpp"

#include <charconv>

namespace hometap {

std::optional<Ipv4> Ipv4::parse(std::string_view dotted) {
    std::uint32_t out = 0;
    const char* p = dotted.data();
    const char* end = p + dotted.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        unsigned v = 0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc{} || v > 255 || next - p > 3) return std::nullopt;
        p = next;
        out = (out << 8) | v;
    }
    if (p != end) return std::nullopt;
    return Ipv4{out};
}

std::string Ipv4::to_string() const {
    return std::to_string((value >> 24) & 0xff) + '.' + std::to_string((value >> 16) & 0xff) + '.' +
           std::to_string((value >> 8) & 0xff) + '.' + std::to_string(value & 0xff);
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
    auto slash = text.find('/');
    auto addr = Ipv4::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int prefix = 32;
    if (slash != std::string_view::npos) {
        auto digits = text.substr(slash + 1);
        if (digits.empty()) return std::nullopt;
        auto [next, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
        if (ec != std::errc{} || next != digits.data() + digits.size() || prefix < 0 || prefix > 32) {
            return std::nullopt;
        }
    }
    return Cidr{*addr, prefix};
}

std::string Cidr::to_string() const { return network.to_string() + '/' + std::to_string(prefix); }

}  // namespace hometap
