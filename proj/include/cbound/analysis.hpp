#pragma once

#include "cbound/boundary.hpp"
#include "cbound/preprocess.hpp"
#include "cbound/seqmodel.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbound {

/// L / N. Throws InputError for N == 0.
double normalized_loss(double loss, std::size_t n);

/// Upper bound on the description length of a model, in bits:
/// a*J + b*log2(n) + c. Throws ConfigError on negative inputs or n < 1.
double description_length(double cost_J, double a = 32.0, double b = 1.0, double n = 1.0,
                          double c = 0.0);

/// Three-segment least-squares fit of log10(L) against log10(J).
/// Phase 1 is points [0, b1_index), phase 2 [b1_index, b2_index), phase 3
/// the rest; each phase has at least two points.
struct PhaseSegmentation {
    std::size_t b1_index = 0;
    std::size_t b2_index = 0;
    double b1_cost = 0;  ///< J of the first phase-2 point
    double b2_cost = 0;  ///< J of the first phase-3 point
    std::array<double, 3> slopes{};
    std::array<double, 3> intercepts{};
    double fit_rss = 0;
};

inline constexpr std::size_t kMinPhasePoints = 6;

/// Exhaustive search over breakpoint pairs. Costs must be > 0 and strictly
/// increasing, losses > 0. Exact ties in residual are broken towards the
/// most balanced segment sizes, then the earliest breakpoints. Throws
/// InputError with fewer than six points.
PhaseSegmentation segment_phases(std::span<const double> costs, std::span<const double> losses);

/// Frontier overload. Points with J == 0 have no log-log position and are
/// dropped before fitting; indices refer to the remaining points.
PhaseSegmentation segment_phases(const BoundaryCurve& curve);

/// Rows are models ascending by cost, columns consecutive windows of the
/// sequence. Each cell is the mean per-step log-likelihood over the
/// predicted positions in the window (0 when it holds none).
struct LocalLikelihoodMap {
    std::string trace_id;
    std::size_t window_length = 100;
    std::vector<std::size_t> cost_J;
    Eigen::MatrixXd mean;
    Eigen::MatrixXi count;

    std::size_t windows() const { return static_cast<std::size_t>(mean.cols()); }
    /// Sum of log-likelihoods of one row (mean * count summed over cells).
    double row_total(std::size_t row) const;
};

/// The recurrent state restarts at each segment so no context crosses a
/// chunk boundary.
LocalLikelihoodMap local_likelihood_map(std::span<const PrunedModel<double>> models,
                                        std::span<const Symbol> seq, std::size_t window_length,
                                        std::span<const Range> segments);

LocalLikelihoodMap local_likelihood_map(std::span<const PrunedModel<double>> models,
                                        std::span<const Symbol> seq, std::size_t window_length);

inline constexpr const char* kPhasesHeader = "trace_id,b1_cost,b2_cost,slope1,slope2,slope3,fit_rss";
inline constexpr const char* kHeatmapHeader = "cost_J,window_index,mean_loglik";

/// Header-only output when `seg` is empty (frontier too short to segment).
std::string phases_to_csv(const std::string& trace_id, const std::optional<PhaseSegmentation>& seg);
std::string heatmap_to_csv(const LocalLikelihoodMap& map);

}  // namespace cbound
