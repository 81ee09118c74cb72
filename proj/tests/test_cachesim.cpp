#include "cbound/cachesim.hpp"
#include "cbound/errors.hpp"
#include "cbound/rng.hpp"
#include "oracles/lru_oracle.hpp"

#include <doctest.h>

using namespace cbound;

namespace {

constexpr auto INF = kInfiniteDistance;

AccessTrace data_only(const std::vector<std::uint64_t>& lines) {
    AccessTrace t;
    for (auto l : lines) t.events.push_back({AccessKind::Load, l * 64, 8});
    return t;
}

AccessTrace random_trace(std::uint64_t seed, std::size_t accesses, std::uint64_t universe) {
    auto eng = rng::make_engine(seed, 99);
    AccessTrace t;
    for (std::size_t i = 0; i < accesses; ++i) {
        const auto instr = rng::below(eng, 4);
        for (std::uint64_t k = 0; k < instr; ++k) t.events.push_back({AccessKind::InstrFetch, 0x400000, 4});
        // skewed: half the accesses go to a small hot set
        const auto line = rng::below(eng, 2) ? rng::below(eng, 16) : rng::below(eng, universe);
        t.events.push_back({AccessKind::Load, line * 64 + rng::below(eng, 64), 8});
    }
    return t;
}

}  // namespace

TEST_CASE("stack distance definition") {
    CHECK(stack_distances(data_only({1, 2, 1})).distances == std::vector<StackDistance>{INF, INF, 2});
    CHECK(stack_distances(data_only({1, 2, 3, 2, 1})).distances ==
          std::vector<StackDistance>{INF, INF, INF, 2, 3});
    CHECK(stack_distances(data_only({5, 5, 5})).distances == std::vector<StackDistance>{INF, 1, 1});
}

TEST_CASE("stack distances match the recency-stack oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto eng = rng::make_engine(seed);
        std::vector<std::uint64_t> lines(2000);
        for (auto& l : lines) l = rng::below(eng, 1 + seed * 40);
        CHECK(stack_distances(lines) == oracle::recency_stack_distances(lines));
    }
}

TEST_CASE("accesses map to the line of their start address") {
    AccessTrace t;
    t.events.push_back({AccessKind::Load, 60, 8});  // spans 60..67, line 0 only
    t.events.push_back({AccessKind::Load, 64, 8});  // line 1
    t.events.push_back({AccessKind::Load, 0, 8});   // line 0 again
    CHECK(stack_distances(t).distances == std::vector<StackDistance>{INF, INF, 2});
    CHECK_THROWS_AS(stack_distances(t, 48), ConfigError);
}

TEST_CASE("miss rate examples") {
    auto t = data_only({1, 2, 1});
    const std::uint64_t caps[] = {1, 2};
    auto s = miss_rate_series(t, caps, 64, 100000);
    REQUIRE(s.size() == 2);
    REQUIRE(s[0].rates.size() == 1);
    CHECK(s[0].rates[0] == 1.0);
    CHECK(s[1].rates[0] == doctest::Approx(2.0 / 3.0));
    CHECK(s[1].accesses_per_window[0] == 3);
}

TEST_CASE("window boundaries, empty windows, trailing partial window") {
    AccessTrace t;
    auto I = [&] { t.events.push_back({AccessKind::InstrFetch, 0x400000, 4}); };
    auto D = [&](std::uint64_t l) { t.events.push_back({AccessKind::Load, l * 64, 8}); };
    // window 0: instr 1-2, miss on line 7
    I(); D(7); I();
    // window 1: instr 3-4, no data
    I(); I();
    // window 2: instr 5-6, hit on line 7
    I(); D(7); I();
    // trailing partial window with no data is dropped
    I();
    const std::uint64_t caps[] = {4};
    auto s = miss_rate_series(t, caps, 64, 2).at(0);
    CHECK(s.rates == std::vector<double>{1.0, 1.0, 0.0});
    CHECK(s.accesses_per_window == std::vector<std::uint64_t>{1, 0, 1});

    D(7);  // now the partial window has data and is kept
    s = miss_rate_series(t, caps, 64, 2).at(0);
    CHECK(s.rates.size() == 4);
    CHECK(s.rates.back() == 0.0);
}

TEST_CASE("empty and degenerate inputs") {
    const std::uint64_t caps[] = {1, 8};
    auto s = miss_rate_series(AccessTrace{}, caps, 64, 10);
    REQUIRE(s.size() == 2);
    CHECK(s[0].rates.empty());
    const std::uint64_t bad[] = {0};
    CHECK_THROWS_AS(miss_rate_series(data_only({1}), bad, 64, 10), ConfigError);
    CHECK_THROWS_AS(miss_rate_series(data_only({1}), caps, 64, 0), ConfigError);
}

TEST_CASE("oracle equivalence and inclusion on random traces") {
    std::vector<std::uint64_t> caps;
    for (std::uint64_t c = 1; c <= 1024; c *= 2) caps.push_back(c);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto t = random_trace(seed, 3000, 1500);
        auto series = miss_rate_series(t, caps, 64, 500);
        for (std::size_t k = 0; k < caps.size(); ++k) {
            std::vector<std::uint64_t> acc;
            auto naive = oracle::naive_window_misses(t, caps[k], 64, 500, &acc);
            CHECK(series[k].misses_per_window == naive);
            CHECK(series[k].accesses_per_window == acc);
            if (k > 0)
                for (std::size_t w = 0; w < naive.size(); ++w) CHECK(series[k].rates[w] <= series[k - 1].rates[w]);
        }
    }
}

TEST_CASE("single pass equals one computation per capacity") {
    auto t = random_trace(11, 2000, 600);
    const std::uint64_t caps[] = {3, 30, 300};
    auto all = miss_rate_series(t, caps, 64, 300);
    for (std::size_t k = 0; k < 3; ++k) {
        const std::uint64_t one[] = {caps[k]};
        auto single = miss_rate_series(t, one, 64, 300).at(0);
        CHECK(single.rates == all[k].rates);
    }
}
