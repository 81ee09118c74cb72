#include "cbound/analysis.hpp"

#include "cbound/errors.hpp"
#include "cbound/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cbound {

double normalized_loss(double loss, std::size_t n) {
    if (n == 0) throw InputError("normalized_loss: N must be >= 1");
    return loss / static_cast<double>(n);
}

double description_length(double cost_J, double a, double b, double n, double c) {
    if (!(cost_J >= 0) || !(a >= 0) || !(b >= 0) || !(c >= 0) || !(n >= 1))
        throw ConfigError("description_length: need J, a, b, c >= 0 and n >= 1");
    return a * cost_J + b * std::log2(n) + c;
}

namespace {

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double rss = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        f.rss += r * r;
    }
    return f;
}

}  // namespace

PhaseSegmentation segment_phases(std::span<const double> costs, std::span<const double> losses) {
    const std::size_t n = costs.size();
    if (losses.size() != n) throw InputError("segment_phases: cost/loss length mismatch");
    if (n < kMinPhasePoints)
        throw InputError("segment_phases: need at least 6 frontier points, got " + std::to_string(n));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(costs[i] > 0) || !(losses[i] > 0))
            throw InputError("segment_phases: costs and losses must be positive");
        if (i > 0 && !(costs[i] > costs[i - 1]))
            throw InputError("segment_phases: costs must be strictly increasing");
        x[i] = std::log10(costs[i]);
        y[i] = std::log10(losses[i]);
    }
    const std::span<const double> xs(x), ys(y);

    struct Candidate {
        std::size_t i, j;
        double rss;
        std::array<LineFit, 3> fits;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 2; i + 4 <= n; ++i) {
        const LineFit f1 = fit_line(xs.subspan(0, i), ys.subspan(0, i));
        for (std::size_t j = i + 2; j + 2 <= n; ++j) {
            const LineFit f2 = fit_line(xs.subspan(i, j - i), ys.subspan(i, j - i));
            const LineFit f3 = fit_line(xs.subspan(j), ys.subspan(j));
            cands.push_back({i, j, f1.rss + f2.rss + f3.rss, {f1, f2, f3}});
        }
    }

    // Residuals within rounding noise of the optimum count as ties.
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double tss = 0;
    for (double v : y) tss += (v - my) * (v - my);
    const double best_rss =
        std::min_element(cands.begin(), cands.end(), [](auto& a, auto& b) { return a.rss < b.rss; })->rss;
    const double tol = 1e-12 * (1.0 + tss);

    auto imbalance = [n](const Candidate& c) {
        const std::array<std::size_t, 3> s{c.i, c.j - c.i, n - c.j};
        return *std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end());
    };
    const Candidate* pick = nullptr;
    for (const auto& c : cands) {
        if (c.rss > best_rss + tol) continue;
        if (!pick || imbalance(c) < imbalance(*pick)) pick = &c;
    }

    PhaseSegmentation seg;
    seg.b1_index = pick->i;
    seg.b2_index = pick->j;
    seg.b1_cost = costs[pick->i];
    seg.b2_cost = costs[pick->j];
    for (int k = 0; k < 3; ++k) {
        seg.slopes[k] = pick->fits[k].slope;
        seg.intercepts[k] = pick->fits[k].intercept;
    }
    seg.fit_rss = pick->rss;
    return seg;
}

PhaseSegmentation segment_phases(const BoundaryCurve& curve) {
    std::vector<double> costs, losses;
    for (const auto& p : curve.points) {
        if (p.cost_J == 0) continue;
        costs.push_back(static_cast<double>(p.cost_J));
        losses.push_back(record_loss(p, curve.loss));
    }
    return segment_phases(costs, losses);
}

double LocalLikelihoodMap::row_total(std::size_t row) const {
    const auto r = static_cast<Eigen::Index>(row);
    return (mean.row(r).array() * count.row(r).cast<double>().array()).sum();
}

LocalLikelihoodMap local_likelihood_map(std::span<const PrunedModel<double>> models,
                                        std::span<const Symbol> seq, std::size_t window_length,
                                        std::span<const Range> segments) {
    if (window_length < 1) throw ConfigError("heatmap window must be >= 1");
    if (models.empty()) throw InputError("local_likelihood_map: no models");

    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> costs(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) costs[m] = cost_J(models[m]);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return costs[a] < costs[b]; });

    // Positions that start a segment (or lie outside every segment) are not predicted.
    std::vector<bool> predicted(seq.size(), false);
    for (const Range& r : segments)
        for (std::size_t t = r.begin + 1; t < r.end && t < seq.size(); ++t) predicted[t] = true;

    const std::size_t windows = (seq.size() + window_length - 1) / window_length;
    LocalLikelihoodMap map;
    map.window_length = window_length;
    map.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(windows));
    map.count = Eigen::MatrixXi::Zero(map.mean.rows(), map.mean.cols());
    for (std::size_t row = 0; row < order.size(); ++row) {
        const auto& model = models[order[row]];
        map.cost_J.push_back(costs[order[row]]);
        const auto ll = step_log_likelihoods(model, seq, segments);
        const auto r = static_cast<Eigen::Index>(row);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            if (!predicted[t]) continue;
            const auto w = static_cast<Eigen::Index>(t / window_length);
            map.mean(r, w) += ll[t];
            map.count(r, w) += 1;
        }
        for (Eigen::Index w = 0; w < map.mean.cols(); ++w)
            if (map.count(r, w) > 0) map.mean(r, w) /= map.count(r, w);
    }
    return map;
}

LocalLikelihoodMap local_likelihood_map(std::span<const PrunedModel<double>> models,
                                        std::span<const Symbol> seq, std::size_t window_length) {
    const Range whole{0, seq.size()};
    return local_likelihood_map(models, seq, window_length, std::span<const Range>(&whole, 1));
}

std::string phases_to_csv(const std::string& trace_id, const std::optional<PhaseSegmentation>& seg) {
    std::string out = kPhasesHeader;
    out += '\n';
    if (seg) {
        out += trace_id + ',' + format_g(seg->b1_cost, 17) + ',' + format_g(seg->b2_cost, 17) + ',' +
               format_g(seg->slopes[0], 9) + ',' + format_g(seg->slopes[1], 9) + ',' +
               format_g(seg->slopes[2], 9) + ',' + format_g(seg->fit_rss, 9) + '\n';
    }
    return out;
}

std::string heatmap_to_csv(const LocalLikelihoodMap& map) {
    std::string out = kHeatmapHeader;
    out += '\n';
    for (Eigen::Index r = 0; r < map.mean.rows(); ++r)
        for (Eigen::Index w = 0; w < map.mean.cols(); ++w)
            out += std::to_string(map.cost_J[static_cast<std::size_t>(r)]) + ',' + std::to_string(w) + ',' +
                   format_g(map.mean(r, w), 9) + '\n';
    return out;
}

}  // namespace cbound
