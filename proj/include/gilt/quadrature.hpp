#pragma once

#include "gilt/operators.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace gilt {

/// A Monte Carlo or closed-form scalar estimate. std_error is 0 exactly for
/// closed forms; valid goes false when the rejected-sample fraction exceeds
/// the 1% budget (the estimate is then reported but must not be trusted).
struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    std::uint64_t seed = 0;
    std::string method = "monte_carlo";
    std::int64_t n_rejected = 0;
    bool valid = true;
    /// Sample variance of the importance weights (diagnostic; exactly-constant
    /// weights in the zero-variance control case show up here).
    double weight_variance = 0.0;
};

/// Importance-sampled estimate of the simplex integral
///   int_{0 <= s_1 <= ... <= s_p <= 1} ds / sqrt(G(g(s_1), ..., g(s_p))),
/// g(t) = A 1_{[0,t]}. Spacings are drawn from Dirichlet(1/2,...,1/2,1), which
/// matches the integrand exactly when A is the identity. Samples whose Gram
/// determinant clamps to zero are rejected and counted; more than 1% rejected
/// marks the run invalid.
MomentEstimate simplex_inv_sqrt_gram(const OperatorSpec& a, int p, std::int64_t n_samples,
                                     std::uint64_t seed);

/// p!/(2 pi)^{p/2} times the simplex integral: the p-th local-time moment of
/// the integrator generated by A.
MomentEstimate moment_via_quadrature(const OperatorSpec& a, int p, std::int64_t n_samples,
                                     std::uint64_t seed);

/// E (l^w)^p for the Wiener process: p! / (2^{p/2} Gamma(p/2 + 1)).
double wiener_moment_closed_form(int p);

/// E (l^b)^k for the Brownian bridge: 2^{k/2} Gamma(k/2 + 1) (Rayleigh moments).
double bridge_moment_closed_form(int k);

/// E (l^y)^p for the concatenated-bridge process with the given interior jump
/// points: composition sum of scaled per-segment bridge moments.
double y_moment_closed_form(std::span<const double> jump_points, int p);

/// E int l^w(u)^q du for the Wiener process: q! / (2^{(q-1)/2} Gamma((q+3)/2)).
double u_integrated_wiener_closed_form(int q);

}  // namespace gilt
