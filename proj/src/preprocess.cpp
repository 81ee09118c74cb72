#include "cbound/preprocess.hpp"

#include "cbound/errors.hpp"
#include "cbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cbound {

std::vector<double> log_clip(std::span<const double> rates, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1e-5))
        throw ConfigError("epsilon must satisfy 0 < epsilon < 1e-5, got " + std::to_string(epsilon));
    std::vector<double> out(rates.size());
    std::transform(rates.begin(), rates.end(), out.begin(),
                   [epsilon](double r) { return std::log10(std::max(r, epsilon)); });
    return out;
}

DiscretizedSequence discretize(std::span<const double> values, int bin_count, double lo, double hi) {
    if (bin_count < 2) throw ConfigError("bin_count must be >= 2");
    if (!(hi > lo)) throw ConfigError("discretize: need lo < hi");
    DiscretizedSequence seq;
    seq.bin_count = bin_count;
    seq.lo = lo;
    seq.hi = hi;
    seq.symbols.reserve(values.size());
    const double width = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v >= lo && v <= hi))
            throw InputError("discretize: value " + std::to_string(v) + " at index " +
                             std::to_string(i) + " outside [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
        const auto k = static_cast<int>(std::floor((v - lo) / width * bin_count));
        seq.symbols.push_back(std::min(bin_count - 1, k));
    }
    return seq;
}

double bin_center(int bin, int bin_count, double lo, double hi) {
    return lo + (static_cast<double>(bin) + 0.5) * (hi - lo) / bin_count;
}

ChunkSplit chunk_split(std::size_t n, std::size_t chunk_length, double train_fraction,
                       std::uint64_t seed) {
    if (chunk_length < 1 || chunk_length > n)
        throw ConfigError("chunk_length must be in [1, N] (N=" + std::to_string(n) + ")");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0, 1)");

    const std::size_t k = (n + chunk_length - 1) / chunk_length;
    if (k < 2) throw ConfigError("a single chunk cannot be split into train and test");
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(k) * train_fraction)), 1, k - 1);
    const std::size_t n_test = k - n_train;

    const std::size_t strata = std::min<std::size_t>(3, n_test);
    std::vector<std::size_t> lo(strata), size(strata), quota(strata, 0);
    for (std::size_t s = 0; s < strata; ++s) {
        lo[s] = s * k / strata;
        size[s] = (s + 1) * k / strata - lo[s];
    }
    // Hand out test slots round-robin, keeping one train chunk per stratum
    // while any stratum still has room for it.
    std::size_t remaining = n_test;
    for (std::size_t keep : {std::size_t{1}, std::size_t{0}}) {
        bool progress = true;
        while (remaining > 0 && progress) {
            progress = false;
            for (std::size_t s = 0; s < strata && remaining > 0; ++s) {
                if (quota[s] + keep < size[s]) {
                    ++quota[s];
                    --remaining;
                    progress = true;
                }
            }
        }
    }

    auto eng = rng::make_engine(seed, 0xc4u);
    std::vector<bool> is_test(k, false);
    for (std::size_t s = 0; s < strata; ++s) {
        std::vector<std::size_t> idx(size[s]);
        std::iota(idx.begin(), idx.end(), lo[s]);
        for (std::size_t i = 0; i < quota[s]; ++i) {
            std::swap(idx[i], idx[i + rng::below(eng, idx.size() - i)]);
            is_test[idx[i]] = true;
        }
    }

    ChunkSplit split;
    split.chunk_length = chunk_length;
    for (std::size_t c = 0; c < k; ++c) {
        Range r{c * chunk_length, std::min(n, (c + 1) * chunk_length)};
        (is_test[c] ? split.test_chunks : split.train_chunks).push_back(r);
    }
    return split;
}

}  // namespace cbound
