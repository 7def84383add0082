#pragma once

#include "gilt/grid.hpp"
#include "gilt/operators.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace gilt {

/// Gram determinant plus conditioning diagnostics. value is zero exactly when
/// the smallest eigenvalue fell at or below the clamp threshold.
struct GramReport {
    double value = 0.0;
    double min_eigenvalue = 0.0;
    bool clamped = false;
};

/// Eigenvalue clamp applied inside gram_det; determinants of nearly dependent
/// families are reported as 0 instead of a small negative number.
inline constexpr double kGramClampThreshold = 1e-14;

Eigen::MatrixXd gram_matrix(std::span<const GridFunction> vs);

/// Determinant of the pairwise inner-product matrix via the symmetric
/// eigenvalue route, eigenvalues at or below the clamp threshold set to 0.
GramReport gram_det(std::span<const GridFunction> vs);
GramReport gram_det(const Eigen::MatrixXd& gram);
inline GramReport gram_det(const std::vector<GridFunction>& vs) {
    return gram_det(std::span<const GridFunction>(vs));
}

/// G(A v_1, ..., A v_n) - ||A^{-1}||^{-2n} G(v_1, ..., v_n). Nonnegative (up to
/// 1e-9 * max(1, G(vs)) numerical slack) whenever A is invertible.
double operator_bound_gap(const OperatorSpec& a, std::span<const GridFunction> vs);

/// | G((I-P_L) g_1, ..., (I-P_L) g_k) - G(g_1, ..., g_k, e_1, ..., e_m) |
/// for an orthonormal basis e of L.
double projection_identity_residual(std::span<const GridFunction> l_basis,
                                    std::span<const GridFunction> gs);

/// | ||f||^2 G(f_1,...,f_n) - G(f_2-f_1, ..., f_n-f_{n-1}) | where f solves
/// (f, f_k) = 1 for all k inside span(f_1..f_n).
double difference_identity_residual(std::span<const GridFunction> fs);

/// | det(Gram + eps I) - sum_k eps^{p-k} * (sum of k-element principal Gram
/// determinants) |, the determinant perturbation expansion.
double perturbation_expansion_residual(std::span<const GridFunction> vs, double eps);

/// Ratio G(1_{[0,t_1..t_k]}, f_1..f_s) / G(1_{[0,t_1..t_k]}, 1_{[0,s_1..s_N]})
/// for a step basis inside span{1_{[0,s_j]}}. Positive and bounded below over
/// nondegenerate t samples; throws when the denominator is clamped to zero.
double step_bound_constant(std::span<const double> jump_points, std::span<const double> ts,
                           std::span<const GridFunction> step_basis);

}  // namespace gilt
