#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hometap/model.hpp"

namespace hometap {

struct StreamSet {
    std::vector<Stream> streams;      // sorted by key
    std::size_t unknown_direction = 0;  // packets left out of every stream
};

/// Groups direction-tagged packets by (service IP, service port, NAT port,
/// transport). One key is one stream for the whole trace; no idle splitting.
StreamSet separate_streams(const Trace& trace);

struct StreamStats {
    std::size_t packets = 0;
    std::uint64_t send_bytes = 0;
    std::uint64_t recv_bytes = 0;
    double first = 0.0;
    double last = 0.0;

    friend bool operator==(const StreamStats&, const StreamStats&) = default;
};

StreamStats stream_stats(const Stream& stream);

}  // namespace hometap
