#include "gilt/gram.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace gilt {

namespace {

// Empty-product convention used by the identities below; the public gram_det
// rejects empty input instead.
GramReport gram_det_allow_empty(const Eigen::MatrixXd& gram) {
    if (gram.rows() == 0) return {1.0, 1.0, false};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    GramReport rep;
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    if (rep.min_eigenvalue <= kGramClampThreshold) {
        rep.value = 0.0;
        rep.clamped = true;
        return rep;
    }
    double det = 1.0;
    for (double lambda : es.eigenvalues()) det *= lambda;
    rep.value = det;
    return rep;
}

}  // namespace

Eigen::MatrixXd gram_matrix(std::span<const GridFunction> vs) {
    const int k = static_cast<int>(vs.size());
    Eigen::MatrixXd g(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j <= i; ++j) g(i, j) = g(j, i) = inner(vs[i], vs[j]);
    return g;
}

GramReport gram_det(const Eigen::MatrixXd& gram) {
    if (gram.rows() == 0) throw std::invalid_argument("gram_det: empty family");
    return gram_det_allow_empty(gram);
}

GramReport gram_det(std::span<const GridFunction> vs) {
    if (vs.empty()) throw std::invalid_argument("gram_det: empty family");
    for (size_t i = 1; i < vs.size(); ++i)
        if (vs[i].grid() != vs[0].grid()) throw std::invalid_argument("gram_det: grid mismatch");
    return gram_det_allow_empty(gram_matrix(vs));
}

double operator_bound_gap(const OperatorSpec& a, std::span<const GridFunction> vs) {
    if (vs.empty()) throw std::invalid_argument("operator_bound_gap: empty family");
    double inv_norm = a.restricted_inverse_norm();
    if (!a.kernel_basis().empty())
        throw std::invalid_argument("operator_bound_gap: operator must be invertible");
    std::vector<GridFunction> images;
    images.reserve(vs.size());
    for (const auto& v : vs) images.push_back(a.apply(v));
    double lhs = gram_det(std::span<const GridFunction>(images)).value;
    double rhs = gram_det(vs).value;
    double n2 = 2.0 * static_cast<double>(vs.size());
    return lhs - std::pow(inv_norm, -n2) * rhs;
}

double projection_identity_residual(std::span<const GridFunction> l_basis,
                                    std::span<const GridFunction> gs) {
    if (gs.empty()) throw std::invalid_argument("projection_identity_residual: empty g family");
    for (size_t i = 0; i < l_basis.size(); ++i)
        for (size_t j = 0; j <= i; ++j) {
            double ip = inner(l_basis[i], l_basis[j]);
            double expected = i == j ? 1.0 : 0.0;
            if (std::abs(ip - expected) > 1e-10)
                throw std::invalid_argument("projection_identity_residual: basis not orthonormal");
        }

    std::vector<GridFunction> projected;
    projected.reserve(gs.size());
    for (const auto& g : gs) {
        GridFunction r = g;
        for (const auto& e : l_basis) r = r - inner(e, g) * e;
        projected.push_back(std::move(r));
    }
    double lhs = gram_det_allow_empty(gram_matrix(projected)).value;

    std::vector<GridFunction> joint(gs.begin(), gs.end());
    joint.insert(joint.end(), l_basis.begin(), l_basis.end());
    double rhs = gram_det_allow_empty(gram_matrix(joint)).value;
    return std::abs(lhs - rhs);
}

double difference_identity_residual(std::span<const GridFunction> fs) {
    const int n = static_cast<int>(fs.size());
    if (n == 0) throw std::invalid_argument("difference_identity_residual: empty family");
    Eigen::MatrixXd gram = gram_matrix(fs);
    GramReport full = gram_det_allow_empty(gram);
    if (full.clamped)
        throw std::invalid_argument("difference_identity_residual: family dependent at tolerance");

    // f in span(fs) with (f, f_k) = 1 for all k; ||f||^2 = e^T Gram^{-1} e.
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd c = gram.ldlt().solve(ones);
    double f_norm_sq = c.sum();

    std::vector<GridFunction> diffs;
    diffs.reserve(static_cast<size_t>(n) - 1);
    for (int k = 0; k + 1 < n; ++k) diffs.push_back(fs[k + 1] - fs[k]);
    double rhs = gram_det_allow_empty(gram_matrix(diffs)).value;
    return std::abs(f_norm_sq * full.value - rhs);
}

double perturbation_expansion_residual(std::span<const GridFunction> vs, double eps) {
    const int p = static_cast<int>(vs.size());
    if (p == 0) throw std::invalid_argument("perturbation_expansion_residual: empty family");
    if (!(eps > 0.0)) throw std::invalid_argument("perturbation_expansion_residual: eps must be > 0");
    Eigen::MatrixXd gram = gram_matrix(vs);

    Eigen::MatrixXd shifted = gram + eps * Eigen::MatrixXd::Identity(p, p);
    double lhs = shifted.ldlt().vectorD().prod();

    // Sum over subsets: eps^{p-k} times the principal minor on each k-subset.
    double rhs = 0.0;
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
        std::vector<int> idx;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        double minor = 1.0;
        if (!idx.empty()) {
            Eigen::MatrixXd sub(idx.size(), idx.size());
            for (size_t i = 0; i < idx.size(); ++i)
                for (size_t j = 0; j < idx.size(); ++j) sub(i, j) = gram(idx[i], idx[j]);
            minor = gram_det_allow_empty(sub).value;
        }
        rhs += std::pow(eps, static_cast<double>(p - idx.size())) * minor;
    }
    return std::abs(lhs - rhs);
}

double step_bound_constant(std::span<const double> jump_points, std::span<const double> ts,
                           std::span<const GridFunction> step_basis) {
    if (step_basis.empty()) throw std::invalid_argument("step_bound_constant: empty step basis");
    const Grid& g = step_basis.front().grid();

    // Precondition: every step function lies in span{1_{[0,s_j]}}.
    std::vector<GridFunction> span_inds;
    for (double s : jump_points) span_inds.push_back(indicator(g, s));
    auto span_on = orthonormalize(span_inds);
    for (const auto& f : step_basis) {
        GridFunction r = f;
        for (const auto& e : span_on) r = r - inner(e, f) * e;
        if (r.norm() > 1e-9 * std::max(1.0, f.norm()))
            throw std::invalid_argument("step_bound_constant: step basis outside indicator span");
    }

    std::vector<GridFunction> numerator, denominator;
    for (double t : ts) {
        numerator.push_back(indicator(g, t));
        denominator.push_back(indicator(g, t));
    }
    for (const auto& f : step_basis) numerator.push_back(f);
    for (const auto& s : span_inds) denominator.push_back(s);

    double den = gram_det_allow_empty(gram_matrix(denominator)).value;
    if (den == 0.0) throw std::runtime_error("step_bound_constant: degenerate t sample");
    double num = gram_det_allow_empty(gram_matrix(numerator)).value;
    return num / den;
}

}  // namespace gilt
