#pragma once

#include "cbound/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct Polyline {
    std::vector<double> costs;
    std::vector<double> losses;
    std::size_t b1 = 0;  // index of the first point past the first kink
    std::size_t b2 = 0;
};

/// Three-segment polyline in log10-log10 space with Gaussian noise on log10(L).
/// Points are evenly spaced in log10(J); segment sizes n1, n2, n3.
inline Polyline three_segment(std::array<std::size_t, 3> sizes, std::array<double, 3> slopes,
                             double sigma, std::uint64_t seed, double x0 = 1.0, double dx = 0.1) {
    auto eng = cbound::rng::make_engine(seed, 0x9017);
    Polyline p;
    const std::size_t n = sizes[0] + sizes[1] + sizes[2];
    p.b1 = sizes[0];
    p.b2 = sizes[0] + sizes[1];
    double y = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const int seg = i <= p.b1 - 1 ? 0 : (i <= p.b2 - 1 ? 1 : 2);
            y += slopes[seg] * dx;
        }
        const double x = x0 + dx * static_cast<double>(i);
        p.costs.push_back(std::pow(10.0, x));
        p.losses.push_back(std::pow(10.0, y + sigma * cbound::rng::normal(eng)));
    }
    return p;
}

}  // namespace oracle
