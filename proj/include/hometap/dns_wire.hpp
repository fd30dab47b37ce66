#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hometap/model.hpp"

namespace hometap::dns {

enum class Status { Answer, NoAnswer, NotResponse, Malformed };

struct Decoded {
    Status status = Status::Malformed;
    DnsAnswer answer;  // valid when status == Answer
};

/// Decodes a DNS message. A records are attached to the first question's
/// name, following CNAME chains found anywhere in the answer section.
Decoded decode_response(std::span<const std::uint8_t> message);

/// Minimal response: one question, one A record per answer (name pointer to the question).
std::vector<std::uint8_t> encode_response(const DnsAnswer& answer);
std::size_t encoded_size(const DnsAnswer& answer);

}  // namespace hometap::dns
