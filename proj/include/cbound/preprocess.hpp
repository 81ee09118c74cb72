#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cbound {

inline constexpr int kDefaultBins = 100;
inline constexpr double kDefaultEpsilon = 1e-6;

using Symbol = std::int32_t;

struct DiscretizedSequence {
    std::vector<Symbol> symbols;
    int bin_count = kDefaultBins;
    double lo = -6.0;  ///< log10(epsilon)
    double hi = 0.0;

    std::size_t size() const noexcept { return symbols.size(); }
};

/// Half-open index range [begin, end).
struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const Range&, const Range&) = default;
};

struct ChunkSplit {
    std::size_t chunk_length = 0;
    std::vector<Range> train_chunks;
    std::vector<Range> test_chunks;

    friend bool operator==(const ChunkSplit&, const ChunkSplit&) = default;
};

/// log10(max(rate, epsilon)). Throws ConfigError unless 0 < epsilon < 1e-5.
std::vector<double> log_clip(std::span<const double> rates, double epsilon = kDefaultEpsilon);

/// Equal-width binning of [lo, hi]; hi falls into the last bin. Throws
/// InputError for values outside [lo, hi].
DiscretizedSequence discretize(std::span<const double> values, int bin_count = kDefaultBins,
                               double lo = -6.0, double hi = 0.0);

/// Value at the centre of a bin; discretize(bin_center(k)) == k.
double bin_center(int bin, int bin_count, double lo, double hi);

/// Consecutive chunks of chunk_length (last may be short), assigned to test
/// by seeded sampling stratified over halves (two test chunks) or thirds
/// (three or more) of the sequence. Throws ConfigError when either side
/// would be empty.
ChunkSplit chunk_split(std::size_t n, std::size_t chunk_length, double train_fraction,
                       std::uint64_t seed);

}  // namespace cbound
