#pragma once

#include "gilt/grid.hpp"
#include "gilt/operators.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>

namespace gilt {

/// Discretized white noise: one N(0,1) draw per cell scaled by 1/sqrt(h), so
/// pairing against a step function realizes (f, xi) with E (f,xi)(g,xi) = (f,g).
struct NoiseVector {
    Grid grid;
    Eigen::VectorXd components;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// One path realization at the grid nodes; values[0] = 0.
struct PathSample {
    Grid grid;
    Eigen::VectorXd values;  // node_count() entries
    std::uint64_t seed = 0;
    std::string label;
};

NoiseVector sample_noise(const Grid& g, std::uint64_t seed, std::uint64_t stream = 0);

/// (f, xi) for the discretized noise.
double pair_noise(const NoiseVector& noise, const GridFunction& f);

/// x(t) = (A 1_{[0,t]}, xi) at every node, from one shared noise. Paths built
/// from the same NoiseVector under different operators are coupled exactly.
PathSample sample_integrator(const OperatorSpec& a, const NoiseVector& noise);

PathSample sample_wiener(const Grid& g, std::uint64_t seed, std::uint64_t stream = 0);
PathSample sample_bridge(const Grid& g, std::uint64_t seed, std::uint64_t stream = 0);

/// Independent Brownian bridges concatenated between consecutive jump points
/// (plus the endpoints 0, 1); pinned to zero at every joint.
PathSample sample_y(std::span<const double> jump_points, const Grid& g, std::uint64_t seed,
                    std::uint64_t stream = 0);

/// Cross-check sampler: factorizes the node covariance of A instead of pairing
/// noise. Agrees with sample_integrator in distribution, not pathwise.
PathSample sample_integrator_by_factorization(const OperatorSpec& a, std::uint64_t seed,
                                              std::uint64_t stream = 0);

/// Batched replicate paths: row r is sample_integrator(a, noise(seed, stream0 + r)).
/// One GEMM per call; used by the Monte Carlo estimators.
Eigen::MatrixXd batch_integrator_paths(const OperatorSpec& a, std::uint64_t seed,
                                       std::uint64_t stream0, int count);

/// Batched coupled y-process paths (shared stream convention with the above).
Eigen::MatrixXd batch_y_paths(std::span<const double> jump_points, const Grid& g,
                              std::uint64_t seed, std::uint64_t stream0, int count);

}  // namespace gilt
