#pragma once

#include "gilt/grid.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gilt {

/// Split of a declared operator kernel into its step-function subspace and the
/// rest, plus the interior jump points of the step subspace. The jump set is a
/// property of the subspace, so it does not depend on the basis chosen.
struct KernelDecomposition {
    std::vector<GridFunction> step_basis;     // orthonormal, jumps only at jump_points
    std::vector<GridFunction> nonstep_basis;  // orthonormal complement inside the kernel
    std::vector<double> jump_points;          // sorted, strictly inside (0,1)
};

/// Low-rank action structure A = base * I + sum_k coef_k b_k (b_k, .) shared by
/// the shipped constructors; lets samplers build paths in O(n) instead of a
/// dense matrix-vector product.
struct RankOneUpdate {
    double coef;
    GridFunction fn;              // orthonormal b_k
    Eigen::VectorXd node_integral;  // running integral of b_k at the nodes
};
struct StructuredAction {
    double base = 1.0;
    std::vector<RankOneUpdate> updates;
};

/// A continuous linear operator on L2([0,1]) discretized as a dense map on grid
/// cell coefficients. The matrix acts on cell values directly; because the grid
/// is uniform, L2 norms are sqrt(cell_width) times Euclidean ones on both sides,
/// so operator norms and singular values of the matrix are the L2 ones.
///
/// Kernels are declared at construction (the constructors below guarantee them
/// structurally); SVD-based detection exists as a diagnostic only.
class OperatorSpec {
public:
    static OperatorSpec identity(const Grid& g);
    static OperatorSpec scaled_identity(const Grid& g, double c);
    /// I - P_L for L = span(span_fns); the kernel is exactly L.
    static OperatorSpec complement_projection(const Grid& g, std::vector<GridFunction> span_fns);
    /// off_span + sum_k (values[k] - off_span) b_k (b_k, .): acts as values[k] on
    /// basis[k] and as off_span * identity on the orthogonal complement.
    /// off_span must be nonzero, which keeps the kernel finite-dimensional.
    static OperatorSpec diagonal(const Grid& g, std::vector<GridFunction> basis,
                                 std::vector<double> values, double off_span = 1.0);
    static OperatorSpec dense(const Grid& g, Eigen::MatrixXd map,
                              std::vector<GridFunction> kernel_basis = {},
                              std::string label = "dense");
    static OperatorSpec compose(const OperatorSpec& outer, const OperatorSpec& inner);
    /// c * A, same kernel.
    static OperatorSpec scale(const OperatorSpec& a, double c);

    const Grid& grid() const { return grid_; }
    const Eigen::MatrixXd& map() const { return map_; }
    const std::vector<GridFunction>& kernel_basis() const { return kernel_basis_; }
    const std::string& label() const { return label_; }

    GridFunction apply(const GridFunction& f) const;
    /// g(t) = A 1_{[0,t]}, t snapped to the nearest node.
    GridFunction g_curve(double t) const;
    /// Covariance matrix of the generated integrator at the given times.
    Eigen::MatrixXd covariance(std::span<const double> times) const;
    /// E x(s) x(t). Exact in continuous time for the structured constructors;
    /// falls back to the grid pairing with fractionally covered cells otherwise.
    double covariance_at(double s, double t) const;
    /// E (x(b)-x(a)) (x(d)-x(c)) = (A 1_{[a,b]}, A 1_{[c,d]}) without the
    /// cancellation that forming covariance differences would cost.
    double increment_covariance(double a, double b, double c, double d) const;
    /// Gram matrix of increments over consecutive intervals of the given
    /// lengths starting at 0. Equals the Gram of g at the interval endpoints,
    /// but built directly from spacings so tiny intervals stay exact.
    Eigen::MatrixXd increment_gram(std::span<const double> spacings) const;
    bool has_exact_covariance() const { return exact_ != nullptr; }

    KernelDecomposition kernel_decomposition() const;
    /// 1 / smallest singular value of A restricted to the orthogonal complement
    /// of the declared kernel. Throws if the restriction is singular at 1e-10.
    double restricted_inverse_norm() const;
    /// Largest singular value (diagnostic).
    double operator_norm() const;
    /// Diagnostic kernel detection by singular-value threshold.
    std::vector<GridFunction> detect_kernel_svd(double tol = 1e-10) const;

    /// Columns k = 0..n: A applied to the node indicators 1_{[0, k/n]}.
    /// Cached; this is the workhorse of path sampling.
    const Eigen::MatrixXd& indicator_image() const;

    /// Singular values of the map, descending. Cached.
    const Eigen::VectorXd& singular_values() const;

    /// Low-rank action when the operator was built from a structured
    /// constructor; nullptr for dense or composed operators.
    const StructuredAction* structured_action() const { return action_.get(); }

private:
    struct ExactCovariance {
        double base_scale_sq = 1.0;                 // contributes base * min(s,t)
        std::vector<double> weights;                // rank-one corrections
        std::vector<GridFunction> correction_fns;   // orthonormal functions e_k
        std::vector<Eigen::VectorXd> node_integrals;  // running integrals of e_k
    };

    struct Cache;

    OperatorSpec(Grid g, Eigen::MatrixXd map, std::vector<GridFunction> kernel,
                 std::string label, std::shared_ptr<const ExactCovariance> exact,
                 std::shared_ptr<const StructuredAction> action = nullptr);

    void verify_kernel() const;

    Grid grid_;
    Eigen::MatrixXd map_;
    std::vector<GridFunction> kernel_basis_;
    std::string label_;
    std::shared_ptr<const ExactCovariance> exact_;
    std::shared_ptr<const StructuredAction> action_;
    std::shared_ptr<Cache> cache_;
};

/// Gram-Schmidt in the L2 inner product; throws if the family is dependent
/// at the given relative tolerance.
std::vector<GridFunction> orthonormalize(std::vector<GridFunction> fns, double tol = 1e-10);

}  // namespace gilt
