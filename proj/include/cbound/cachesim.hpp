#pragma once

#include "cbound/trace.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace cbound {

/// LRU stack distance of one data access; kInfinite marks a first touch.
using StackDistance = std::uint64_t;
inline constexpr StackDistance kInfiniteDistance = std::numeric_limits<std::uint64_t>::max();

/// Distances in data-access order. Distance 1 is an immediate re-reference,
/// so a fully associative LRU cache of C lines hits iff distance <= C.
struct StackDistanceStream {
    std::vector<StackDistance> distances;
    /// Number of instruction fetches seen before each data access.
    std::vector<std::uint64_t> instructions_before;
    std::uint64_t total_instructions = 0;
    std::uint32_t line_size = 64;
};

/// Stack distances over an arbitrary line-id sequence (O(log n) per access).
std::vector<StackDistance> stack_distances(std::span<const std::uint64_t> lines);

/// Maps every data access to `address / line_size` and computes distances.
/// Throws ConfigError if line_size is not a power of two.
StackDistanceStream stack_distances(const AccessTrace& trace, std::uint32_t line_size = 64);

struct MissRateSeries {
    std::uint64_t cache_lines = 0;
    std::uint64_t window_instructions = 100000;
    std::vector<double> rates;
    std::vector<std::uint64_t> accesses_per_window;
    std::vector<std::uint64_t> misses_per_window;
    std::string trace_id;
};

/// Windowed miss rates for every capacity from a single distance stream.
/// Windows advance on instruction count; an empty window repeats the
/// previous rate (1.0 for the first); a trailing partial window is kept only
/// if it holds at least one data access.
std::vector<MissRateSeries> miss_rate_series(const StackDistanceStream& stream,
                                             std::span<const std::uint64_t> cache_sizes_lines,
                                             std::uint64_t window_instructions,
                                             const std::string& trace_id = {});

std::vector<MissRateSeries> miss_rate_series(const AccessTrace& trace,
                                             std::span<const std::uint64_t> cache_sizes_lines,
                                             std::uint32_t line_size = 64,
                                             std::uint64_t window_instructions = 100000);

}  // namespace cbound
