#pragma once

#include "gilt/operators.hpp"
#include "gilt/quadrature.hpp"
#include "gilt/sampler.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gilt {

/// Mollified occupation estimates along a decreasing epsilon schedule.
/// extrapolated removes the leading sqrt(eps) bias by a least-squares fit of
/// the tail estimates against {1, sqrt(eps)}; converged reflects stability of
/// the last two raw estimates (thresholds calibrated on Wiener paths, wide
/// enough to keep well-behaved sweeps and still reject the 1/sqrt(eps)
/// divergence of a path sitting on its own level).
struct LocalTimeEstimate {
    double u = 0.0;
    double t_horizon = 1.0;
    std::vector<double> epsilon_schedule;
    std::vector<double> estimates;
    double extrapolated = 0.0;
    bool converged = false;
};

/// Occupation mass per unit level, box-kernel histogram. Bin edges sit on the
/// global lattice k * bin_width so histograms of different paths share edges.
struct OccupationDensity {
    std::vector<double> bin_edges;
    std::vector<double> masses;
};

/// Trapezoid rule over the grid nodes of the Gaussian kernel applied to the
/// path: int_0^1 f_eps(x(s) - u) ds.
double mollified_local_time(const PathSample& path, double u, double eps);

std::vector<double> default_epsilon_schedule();

LocalTimeEstimate epsilon_sweep(const PathSample& path, double u, std::span<const double> schedule);

OccupationDensity occupation_histogram(const PathSample& path, double bin_width);

/// Local-time moments E (l^x)^p at level u by Monte Carlo over independent
/// paths; non-converged sweeps are excluded and counted, and more than 5%
/// of them marks the run invalid.
MomentEstimate moment_mc(const OperatorSpec& a, int p, double u, std::int64_t reps,
                         std::uint64_t seed);
std::vector<MomentEstimate> moment_mc_multi(const OperatorSpec& a, std::span<const int> ps,
                                            double u, std::int64_t reps, std::uint64_t seed);

/// Same estimator pipeline for the concatenated-bridge comparison process.
std::vector<MomentEstimate> y_moment_mc_multi(std::span<const double> jump_points, const Grid& g,
                                              std::span<const int> ps, std::int64_t reps,
                                              std::uint64_t seed);

/// E int l^x(u)^q du over the path range, estimated by q-point coincidence
/// counting on a level histogram (self-pairs excluded).
MomentEstimate u_integrated_moment_mc(const OperatorSpec& a, int q, std::int64_t reps,
                                      std::uint64_t seed, double bin_width = 0.005);

/// Coupled estimate of E int (l^{x_n}(u) - l^x(u))^{2m} du: both paths are built
/// from the same noise replicate and binned on a common level lattice.
MomentEstimate l2m_distance(const OperatorSpec& a_n, const OperatorSpec& a, int m,
                            std::int64_t reps, std::uint64_t seed);

}  // namespace gilt
