#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hometap {

/// IPv4 address held in host byte order.
struct Ipv4 {
    std::uint32_t value = 0;

    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
    constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

    static std::optional<Ipv4> parse(std::string_view dotted);
    std::string to_string() const;

    friend constexpr auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

/// IPv4 prefix such as 10.0.0.0/24.
struct Cidr {
    Ipv4 network;
    int prefix = 32;

    static std::optional<Cidr> parse(std::string_view text);
    std::string to_string() const;

    std::uint32_t mask() const {
        return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
    }
    bool contains(Ipv4 addr) const { return (addr.value & mask()) == (network.value & mask()); }

    friend bool operator==(const Cidr&, const Cidr&) = default;
};

}  // namespace hometap
