#include "cbound/analysis.hpp"
#include "cbound/errors.hpp"
#include "cbound/rng.hpp"
#include "oracles/polyline.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbound;

namespace {

Architecture small_arch() {
    Architecture a;
    a.d_in = 4;
    a.width = 4;
    a.ff = {8, 8, 4, 100};
    a.horizon = 8;
    return a;
}

std::vector<Symbol> random_symbols(std::size_t n, std::uint64_t seed) {
    auto eng = rng::make_engine(seed, 5);
    std::vector<Symbol> s(n);
    for (auto& v : s) v = static_cast<Symbol>(rng::below(eng, 100));
    return s;
}

std::size_t dist(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

}  // namespace

TEST_CASE("normalized loss") {
    CHECK(normalized_loss(46.0517, 11) == doctest::Approx(4.1865).epsilon(1e-4));
    CHECK(normalized_loss(0.0, 5) == 0.0);
    CHECK(normalized_loss(10.0, 4) == 2.5);
    CHECK_THROWS_AS(normalized_loss(1.0, 0), InputError);

    // The uniform model's per-symbol loss approaches ln(100) from below.
    const auto m = [] {
        auto g = init_model(small_arch(), 0);
        g.theta.setZero();
        return g;
    }();
    const auto seq = random_symbols(2000, 1);
    const double per = normalized_loss(nll(m, seq), seq.size());
    CHECK(per < std::log(100.0));
    CHECK(per == doctest::Approx(1999.0 / 2000.0 * std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("description length bound") {
    CHECK(description_length(1000, 32, 1, 1e6, 0) == doctest::Approx(32019.93).epsilon(1e-6));
    CHECK(description_length(0, 32, 1, 1e6, 5) == doctest::Approx(std::log2(1e6) + 5));
    CHECK(description_length(77, 0, 0, 1e6, 0) == 0.0);
    CHECK(description_length(10) < description_length(11));
    CHECK_THROWS_AS(description_length(-1), ConfigError);
    CHECK_THROWS_AS(description_length(1, 32, 1, 0.5), ConfigError);
}

TEST_CASE("segmentation recovers noisy polyline breakpoints") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = oracle::three_segment({8, 8, 8}, {-0.05, -1.2, -0.04}, 0.01, seed);
        const auto seg = segment_phases(p.costs, p.losses);
        CHECK(dist(seg.b1_index, p.b1) <= 1);
        CHECK(dist(seg.b2_index, p.b2) <= 1);
        CHECK(seg.b1_cost == p.costs[seg.b1_index]);
        CHECK(seg.b2_cost == p.costs[seg.b2_index]);
        CHECK(seg.slopes[1] < -1.0);
    }
}

TEST_CASE("segmentation on hand-built kinks") {
    // Six points: with two per segment there is one admissible split.
    const std::vector<double> j6{10, 20, 40, 80, 160, 320};
    const std::vector<double> l6{100, 99, 50, 25, 24.9, 24.8};
    const auto s6 = segment_phases(j6, l6);
    CHECK(s6.b1_index == 2);
    CHECK(s6.b2_index == 4);
    CHECK(s6.fit_rss == doctest::Approx(0.0).epsilon(1e-12));

    // Nine points with kinks after the third and sixth.
    const std::vector<double> j9{1, 10, 100, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
    std::vector<double> y{0.0, -0.01, -0.02, -1.02, -2.02, -3.02, -3.03, -3.04, -3.05};
    std::vector<double> l9;
    for (double v : y) l9.push_back(std::pow(10.0, v + 4));
    const auto s9 = segment_phases(j9, l9);
    CHECK(dist(s9.b1_index, 3) <= 1);
    CHECK(dist(s9.b2_index, 6) <= 1);
    CHECK(s9.slopes[1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("exactly linear frontier picks the most balanced split") {
    std::vector<double> j, l;
    for (int i = 0; i < 9; ++i) {
        j.push_back(std::pow(10.0, 1 + 0.25 * i));
        l.push_back(std::pow(10.0, 2 - 0.5 * 0.25 * i));
    }
    auto s = segment_phases(j, l);
    CHECK(s.b1_index == 3);
    CHECK(s.b2_index == 6);
    for (double slope : s.slopes) CHECK(slope == doctest::Approx(-0.5).epsilon(1e-9));

    j.push_back(std::pow(10.0, 1 + 0.25 * 9));
    l.push_back(std::pow(10.0, 2 - 0.5 * 0.25 * 9));
    s = segment_phases(j, l);
    // Sizes (3,3,4), (3,4,3), (4,3,3) are equally balanced: earliest wins.
    CHECK(s.b1_index == 3);
    CHECK(s.b2_index == 6);
}

TEST_CASE("segmentation is invariant to rescaling the cost axis") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = oracle::three_segment({7, 9, 6}, {-0.1, -0.9, -0.05}, 0.02, seed);
        auto scaled = p.costs;
        for (auto& c : scaled) c *= 1000.0;
        const auto a = segment_phases(p.costs, p.losses);
        const auto b = segment_phases(scaled, p.losses);
        CHECK(a.b1_index == b.b1_index);
        CHECK(a.b2_index == b.b2_index);
        CHECK(b.b2_cost == doctest::Approx(1000.0 * a.b2_cost));
        for (int k = 0; k < 3; ++k) CHECK(a.slopes[k] == doctest::Approx(b.slopes[k]).epsilon(1e-9));
    }
}

TEST_CASE("segmentation input errors") {
    const std::vector<double> five{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(segment_phases(five, five), InputError);
    const std::vector<double> j{1, 2, 3, 3, 5, 6};
    const std::vector<double> l{6, 5, 4, 3, 2, 1};
    CHECK_THROWS_AS(segment_phases(j, l), InputError);
    const std::vector<double> j2{1, 2, 3, 4, 5, 6};
    const std::vector<double> l0{6, 5, 4, 3, 2, 0};
    CHECK_THROWS_AS(segment_phases(j2, l0), InputError);
}

TEST_CASE("frontier segmentation skips the zero-cost point") {
    const auto p = oracle::three_segment({3, 3, 3}, {-0.05, -1.2, -0.04}, 0.0, 0);
    BoundaryCurve curve;
    ModelRecord empty;
    empty.cost_J = 0;
    empty.loss_train = 1e6;
    curve.points.push_back(empty);
    for (std::size_t i = 0; i < p.costs.size(); ++i) {
        ModelRecord r;
        r.cost_J = static_cast<std::size_t>(std::llround(p.costs[i]));
        r.loss_train = p.losses[i];
        curve.points.push_back(r);
    }
    const auto seg = segment_phases(curve);
    CHECK(seg.b1_cost == curve.points[1 + seg.b1_index].cost_J);
    CHECK(seg.b2_cost == curve.points[1 + seg.b2_index].cost_J);
}

TEST_CASE("uniform model heatmap is ln(0.01) everywhere") {
    auto g = init_model(small_arch(), 0);
    g.theta.setZero();
    const std::vector<PrunedModel<double>> models{apply_threshold(g, 0.5)};
    const auto seq = random_symbols(250, 2);
    const auto map = local_likelihood_map(models, seq, 100);
    CHECK(map.windows() == 3);
    CHECK(map.count(0, 0) == 99);
    CHECK(map.count(0, 2) == 50);
    for (Eigen::Index w = 0; w < 3; ++w) CHECK(map.mean(0, w) == doctest::Approx(std::log(0.01)).epsilon(1e-12));
}

TEST_CASE("window length one reproduces the per-step series") {
    const auto g = init_model(small_arch(), 3);
    const std::vector<PrunedModel<double>> models{apply_threshold(g, 0.5)};
    const auto seq = random_symbols(40, 3);
    const auto map = local_likelihood_map(models, seq, 1);
    const auto ll = step_log_likelihoods(models[0], seq);
    REQUIRE(map.windows() == seq.size());
    CHECK(map.count(0, 0) == 0);
    for (std::size_t t = 0; t < seq.size(); ++t) CHECK(map.mean(0, static_cast<Eigen::Index>(t)) == ll[t]);
}

TEST_CASE("heatmap rows reconcile with nll and sort by cost") {
    const auto seq = random_symbols(300, 4);
    const std::vector<Range> chunks{{0, 120}, {120, 240}, {240, 300}};
    std::vector<PrunedModel<double>> models;
    auto base = init_model(small_arch(), 9);
    auto eng = rng::make_engine(9, 3);
    for (Eigen::Index i = 0; i < base.z.size(); ++i) base.z[i] = rng::uniform(eng, -3.0, 3.0);
    for (double gmin : {0.9, 0.05, 0.5, 0.7, 0.3}) models.push_back(apply_threshold(base, gmin));

    const auto map = local_likelihood_map(models, seq, 32, chunks);
    CHECK(map.windows() == 10);
    for (std::size_t r = 1; r < map.cost_J.size(); ++r) CHECK(map.cost_J[r] >= map.cost_J[r - 1]);
    for (std::size_t r = 0; r < models.size(); ++r) {
        const auto& m = *std::find_if(models.begin(), models.end(),
                                      [&](const auto& p) { return cost_J(p) == map.cost_J[r]; });
        const double l = nll(m, seq, chunks);
        CHECK(std::abs(-map.row_total(r) - l) <= 1e-6 * l);
        CHECK((map.mean.row(static_cast<Eigen::Index>(r)).array() <= 0).all());
    }
    CHECK(map.count.sum() == static_cast<int>(5 * (seq.size() - chunks.size())));
}

TEST_CASE("heatmap argument errors") {
    const auto g = init_model(small_arch(), 0);
    const std::vector<PrunedModel<double>> models{apply_threshold(g, 0.5)};
    const auto seq = random_symbols(10, 0);
    CHECK_THROWS_AS(local_likelihood_map(models, seq, 0), ConfigError);
    CHECK_THROWS_AS(local_likelihood_map(std::vector<PrunedModel<double>>{}, seq, 10), InputError);
}

TEST_CASE("phase and heatmap csv") {
    CHECK(phases_to_csv("t", std::nullopt) == std::string(kPhasesHeader) + "\n");
    PhaseSegmentation s;
    s.b1_cost = 12;
    s.b2_cost = 340;
    s.slopes = {-0.05, -1.2, -0.04};
    s.fit_rss = 0.001;
    CHECK(phases_to_csv("t", s) == std::string(kPhasesHeader) + "\nt,12,340,-0.05,-1.2,-0.04,0.001\n");

    LocalLikelihoodMap m;
    m.cost_J = {5};
    m.mean = Eigen::MatrixXd::Constant(1, 2, -1.5);
    m.count = Eigen::MatrixXi::Constant(1, 2, 3);
    CHECK(heatmap_to_csv(m) == std::string(kHeatmapHeader) + "\n5,0,-1.5\n5,1,-1.5\n");
}
