#pragma once

// Distribution helpers built directly on std::mt19937_64 output bits. The
// standard distributions are implementation-defined, so results would differ
// between standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cbound::rng {

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    // splitmix64 over (seed, stream) so nearby seeds give unrelated states
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return Engine(mix(seed ^ mix(stream)));
}

/// Uniform in [0, 1).
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

/// Uniform integer in [0, n), rejection sampled. n must be > 0.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % n;
}

/// Standard normal via Box-Muller (one value per call).
inline double normal(Engine& eng) {
    double u1 = uniform01(eng);
    while (u1 <= 0.0) u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cbound::rng
