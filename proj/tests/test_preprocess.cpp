#include "cbound/errors.hpp"
#include "cbound/preprocess.hpp"
#include "cbound/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbound;

TEST_CASE("log_clip") {
    const double rates[] = {1.0, 0.0, 0.001};
    auto v = log_clip(rates, 1e-6);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(-6.0));
    CHECK(v[2] == doctest::Approx(-3.0));
    CHECK_THROWS_AS(log_clip(rates, 0.0), ConfigError);
    CHECK_THROWS_AS(log_clip(rates, 1e-5), ConfigError);
    CHECK_THROWS_AS(log_clip(rates, 1e-4), ConfigError);
}

TEST_CASE("log_clip stays in range") {
    auto eng = rng::make_engine(4);
    std::vector<double> r(1000);
    for (auto& x : r) x = rng::uniform01(eng) * (rng::below(eng, 2) ? 1.0 : 1e-8);
    r.push_back(0.0);
    r.push_back(1.0);
    for (double v : log_clip(r, 1e-6)) {
        CHECK(v >= std::log10(1e-6));
        CHECK(v <= 0.0);
    }
}

TEST_CASE("discretize edges and midpoint") {
    const double v[] = {-6.0, 0.0, -3.0};
    auto s = discretize(v, 100, -6.0, 0.0);
    CHECK(s.symbols == std::vector<Symbol>{0, 99, 50});
    const double out_of_range[] = {0.5};
    CHECK_THROWS_AS(discretize(out_of_range, 100, -6.0, 0.0), InputError);
    CHECK_THROWS_AS(discretize(v, 1, -6.0, 0.0), ConfigError);
}

TEST_CASE("bin centres quantize back to their bin") {
    for (int bins : {2, 10, 100, 257}) {
        std::vector<double> centers;
        for (int k = 0; k < bins; ++k) centers.push_back(bin_center(k, bins, -6.0, 0.0));
        auto s = discretize(centers, bins, -6.0, 0.0);
        for (int k = 0; k < bins; ++k) CHECK(s.symbols[static_cast<std::size_t>(k)] == k);
    }
}

TEST_CASE("chunk split counts and stratification") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = chunk_split(100, 10, 0.8, seed);
        CHECK(s.train_chunks.size() == 8);
        REQUIRE(s.test_chunks.size() == 2);
        CHECK((s.test_chunks[0].begin < 50) != (s.test_chunks[1].begin < 50));
    }
    CHECK(chunk_split(100, 10, 0.8, 5) == chunk_split(100, 10, 0.8, 5));
}

TEST_CASE("chunk split covers the sequence exactly once") {
    for (std::size_t n : {7u, 100u, 1001u, 4096u}) {
        for (std::size_t len : {1u, 3u, 64u}) {
            if (len > n) continue;
            auto s = chunk_split(n, len, 0.7, n + len);
            std::vector<int> hit(n, 0);
            for (const auto* v : {&s.train_chunks, &s.test_chunks})
                for (const auto& r : *v)
                    for (std::size_t i = r.begin; i < r.end; ++i) ++hit[i];
            CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));

            const std::size_t k = (n + len - 1) / len;
            if (s.test_chunks.size() >= 3 && k >= 6) {
                // every third holds at least one test and one train chunk
                for (int third = 0; third < 3; ++third) {
                    const std::size_t lo = third * k / 3 * len, hi = (third + 1) * k / 3 * len;
                    auto inside = [&](const std::vector<Range>& v) {
                        return std::any_of(v.begin(), v.end(), [&](auto& r) { return r.begin >= lo && r.begin < hi; });
                    };
                    CHECK(inside(s.test_chunks));
                    CHECK(inside(s.train_chunks));
                }
            }
        }
    }
}

TEST_CASE("chunk split degenerate cases") {
    CHECK_THROWS_AS(chunk_split(100, 100, 0.8, 0), ConfigError);
    CHECK_THROWS_AS(chunk_split(100, 101, 0.8, 0), ConfigError);
    CHECK_THROWS_AS(chunk_split(100, 10, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(chunk_split(100, 10, 1.0, 0), ConfigError);
    auto two = chunk_split(100, 50, 0.8, 0);
    CHECK(two.train_chunks.size() == 1);
    CHECK(two.test_chunks.size() == 1);
}
