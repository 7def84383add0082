#include "gilt/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>

namespace gilt {

namespace {

constexpr double kKernelTol = 1e-10;        // declared kernel must be annihilated at this level
constexpr double kInvertTol = 1e-10;        // restricted singular values below this count as singular
constexpr int kMaxStepJumps = 64;           // jump budget separating step from sampled functions
constexpr int kRowSearchCap = 256;          // candidate rows examined when isolating hidden steps

// Running integral of a step function evaluated at continuous t: node value
// plus the in-cell linear part. Exact, O(1) per evaluation.
double interp_running(const Eigen::VectorXd& node_integral, const GridFunction& f, double t) {
    const int n = f.grid().cells();
    int cell = std::clamp(static_cast<int>(std::floor(t * n)), 0, n - 1);
    return node_integral[cell] + (t - f.grid().node(cell)) * f.coeffs()[cell];
}

Eigen::MatrixXd coeff_matrix(const std::vector<GridFunction>& fns) {
    if (fns.empty()) return {};
    Eigen::MatrixXd b(fns.front().grid().cells(), static_cast<int>(fns.size()));
    for (int j = 0; j < b.cols(); ++j) b.col(j) = fns[static_cast<size_t>(j)].coeffs();
    return b;
}

}  // namespace

struct OperatorSpec::Cache {
    std::once_flag indicator_once, svd_once, restricted_once;
    Eigen::MatrixXd indicator_image;
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd svd_v;  // right singular vectors, for kernel detection
    double restricted_sigma_min = -1.0;
};

std::vector<GridFunction> orthonormalize(std::vector<GridFunction> fns, double tol) {
    std::vector<GridFunction> out;
    out.reserve(fns.size());
    for (auto& f : fns) {
        double original_norm = f.norm();
        GridFunction v = f;
        for (int pass = 0; pass < 2; ++pass)  // re-orthogonalized MGS
            for (const auto& q : out) v = v - inner(q, v) * q;
        double nv = v.norm();
        if (nv <= tol * std::max(1.0, original_norm))
            throw std::invalid_argument("orthonormalize: family is linearly dependent at tolerance");
        out.push_back(v * (1.0 / nv));
    }
    return out;
}

OperatorSpec::OperatorSpec(Grid g, Eigen::MatrixXd map, std::vector<GridFunction> kernel,
                           std::string label, std::shared_ptr<const ExactCovariance> exact,
                           std::shared_ptr<const StructuredAction> action)
    : grid_(g),
      map_(std::move(map)),
      kernel_basis_(std::move(kernel)),
      label_(std::move(label)),
      exact_(std::move(exact)),
      action_(std::move(action)),
      cache_(std::make_shared<Cache>()) {
    if (map_.rows() != grid_.cells() || map_.cols() != grid_.cells())
        throw std::invalid_argument("OperatorSpec: map must be n x n for the grid");
    verify_kernel();
}

void OperatorSpec::verify_kernel() const {
    for (const auto& v : kernel_basis_) {
        if (v.grid() != grid_) throw std::invalid_argument("OperatorSpec: kernel element on wrong grid");
        double vn = v.norm();
        if (vn == 0.0) throw std::invalid_argument("OperatorSpec: kernel element is zero");
        double image = std::sqrt(grid_.cell_width()) * (map_ * v.coeffs()).norm();
        if (image > kKernelTol * vn)
            throw std::invalid_argument("OperatorSpec: declared kernel element is not annihilated");
    }
    if (!kernel_basis_.empty()) orthonormalize(kernel_basis_);  // independence check
}

OperatorSpec OperatorSpec::identity(const Grid& g) {
    auto exact = std::make_shared<ExactCovariance>();
    auto action = std::make_shared<StructuredAction>();
    return OperatorSpec(g, Eigen::MatrixXd::Identity(g.cells(), g.cells()), {}, "identity", exact,
                        action);
}

OperatorSpec OperatorSpec::scaled_identity(const Grid& g, double c) {
    auto exact = std::make_shared<ExactCovariance>();
    exact->base_scale_sq = c * c;
    auto action = std::make_shared<StructuredAction>();
    action->base = c;
    return OperatorSpec(g, c * Eigen::MatrixXd::Identity(g.cells(), g.cells()), {},
                        "scaled_identity", exact, action);
}

OperatorSpec OperatorSpec::complement_projection(const Grid& g, std::vector<GridFunction> span_fns) {
    auto basis = orthonormalize(std::move(span_fns));
    Eigen::MatrixXd b = coeff_matrix(basis);
    Eigen::MatrixXd map = Eigen::MatrixXd::Identity(g.cells(), g.cells());
    if (b.size() > 0) map -= b * (g.cell_width() * b.transpose());
    auto exact = std::make_shared<ExactCovariance>();
    auto action = std::make_shared<StructuredAction>();
    for (const auto& e : basis) {
        exact->weights.push_back(-1.0);
        exact->correction_fns.push_back(e);
        exact->node_integrals.push_back(running_integral(e));
        action->updates.push_back({-1.0, e, running_integral(e)});
    }
    return OperatorSpec(g, std::move(map), std::move(basis), "complement_projection", exact,
                        action);
}

OperatorSpec OperatorSpec::diagonal(const Grid& g, std::vector<GridFunction> basis,
                                    std::vector<double> values, double off_span) {
    if (basis.size() != values.size())
        throw std::invalid_argument("OperatorSpec::diagonal: basis/value count mismatch");
    if (off_span == 0.0)
        throw std::invalid_argument("OperatorSpec::diagonal: off-span value must be nonzero");
    auto on = orthonormalize(std::move(basis));
    Eigen::MatrixXd map = off_span * Eigen::MatrixXd::Identity(g.cells(), g.cells());
    auto exact = std::make_shared<ExactCovariance>();
    auto action = std::make_shared<StructuredAction>();
    exact->base_scale_sq = off_span * off_span;
    action->base = off_span;
    std::vector<GridFunction> kernel;
    for (size_t k = 0; k < on.size(); ++k) {
        map += (values[k] - off_span) * on[k].coeffs() * (g.cell_width() * on[k].coeffs().transpose());
        exact->weights.push_back(values[k] * values[k] - off_span * off_span);
        exact->correction_fns.push_back(on[k]);
        exact->node_integrals.push_back(running_integral(on[k]));
        action->updates.push_back({values[k] - off_span, on[k], running_integral(on[k])});
        if (values[k] == 0.0) kernel.push_back(on[k]);
    }
    return OperatorSpec(g, std::move(map), std::move(kernel), "diagonal", exact, action);
}

OperatorSpec OperatorSpec::dense(const Grid& g, Eigen::MatrixXd map,
                                 std::vector<GridFunction> kernel_basis, std::string label) {
    return OperatorSpec(g, std::move(map), std::move(kernel_basis), std::move(label), nullptr);
}

OperatorSpec OperatorSpec::compose(const OperatorSpec& outer, const OperatorSpec& inner) {
    if (outer.grid() != inner.grid()) throw std::invalid_argument("compose: grid mismatch");
    Eigen::MatrixXd map = outer.map_ * inner.map_;
    // Kernel declared only when it is structurally clear; otherwise detected.
    std::vector<GridFunction> kernel = inner.kernel_basis_;
    if (!outer.kernel_basis_.empty()) {
        OperatorSpec probe(inner.grid(), map, {}, "probe", nullptr);
        kernel = probe.detect_kernel_svd();
    }
    return OperatorSpec(outer.grid(), std::move(map), std::move(kernel),
                        outer.label_ + "*" + inner.label_, nullptr);
}

OperatorSpec OperatorSpec::scale(const OperatorSpec& a, double c) {
    if (c == 0.0) throw std::invalid_argument("OperatorSpec::scale: zero scale collapses the operator");
    std::shared_ptr<const ExactCovariance> exact;
    if (a.exact_) {
        auto e = std::make_shared<ExactCovariance>(*a.exact_);
        e->base_scale_sq *= c * c;
        for (auto& w : e->weights) w *= c * c;
        exact = e;
    }
    std::shared_ptr<const StructuredAction> action;
    if (a.action_) {
        auto act = std::make_shared<StructuredAction>(*a.action_);
        act->base *= c;
        for (auto& u : act->updates) u.coef *= c;
        action = act;
    }
    std::vector<GridFunction> kernel = a.kernel_basis_;
    return OperatorSpec(a.grid_, c * a.map_, std::move(kernel), a.label_ + "_scaled", exact, action);
}

GridFunction OperatorSpec::apply(const GridFunction& f) const {
    if (f.grid() != grid_) throw std::invalid_argument("OperatorSpec::apply: grid mismatch");
    return GridFunction(grid_, map_ * f.coeffs());
}

GridFunction OperatorSpec::g_curve(double t) const { return apply(indicator(grid_, t)); }

double OperatorSpec::covariance_at(double s, double t) const {
    if (exact_) {
        double r = exact_->base_scale_sq * std::min(s, t);
        for (size_t k = 0; k < exact_->weights.size(); ++k) {
            double es = interp_running(exact_->node_integrals[k], exact_->correction_fns[k], s);
            double et = interp_running(exact_->node_integrals[k], exact_->correction_fns[k], t);
            r += exact_->weights[k] * es * et;
        }
        return r;
    }
    GridFunction gs = apply(indicator_projection(grid_, s));
    GridFunction gt = apply(indicator_projection(grid_, t));
    return inner(gs, gt);
}

double OperatorSpec::increment_covariance(double a, double b, double c, double d) const {
    if (exact_) {
        double overlap = std::max(0.0, std::min(b, d) - std::max(a, c));
        double r = exact_->base_scale_sq * overlap;
        for (size_t k = 0; k < exact_->weights.size(); ++k) {
            const auto& fn = exact_->correction_fns[k];
            const auto& ni = exact_->node_integrals[k];
            double eab = interp_running(ni, fn, b) - interp_running(ni, fn, a);
            double ecd = interp_running(ni, fn, d) - interp_running(ni, fn, c);
            r += exact_->weights[k] * eab * ecd;
        }
        return r;
    }
    GridFunction fab = apply(indicator_projection(grid_, b) - indicator_projection(grid_, a));
    GridFunction fcd = apply(indicator_projection(grid_, d) - indicator_projection(grid_, c));
    return inner(fab, fcd);
}

Eigen::MatrixXd OperatorSpec::increment_gram(std::span<const double> spacings) const {
    const int p = static_cast<int>(spacings.size());
    std::vector<double> t(static_cast<size_t>(p) + 1);
    t[0] = 0.0;
    for (int i = 0; i < p; ++i) t[static_cast<size_t>(i) + 1] = t[i] + spacings[i];
    Eigen::MatrixXd g(p, p);
    if (exact_) {
        g.setZero();
        for (int i = 0; i < p; ++i) g(i, i) = exact_->base_scale_sq * spacings[i];
        Eigen::VectorXd v(p);
        for (size_t k = 0; k < exact_->weights.size(); ++k) {
            const auto& fn = exact_->correction_fns[k];
            const auto& ni = exact_->node_integrals[k];
            for (int i = 0; i < p; ++i)
                v[i] = interp_running(ni, fn, t[i + 1]) - interp_running(ni, fn, t[i]);
            g += exact_->weights[k] * v * v.transpose();
        }
        return g;
    }
    std::vector<Eigen::VectorXd> images;
    images.reserve(p);
    for (int i = 0; i < p; ++i) {
        GridFunction d = indicator_projection(grid_, t[i + 1]) - indicator_projection(grid_, t[i]);
        images.push_back(map_ * d.coeffs());
    }
    for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j)
            g(i, j) = g(j, i) = grid_.cell_width() * images[i].dot(images[j]);
    return g;
}

Eigen::MatrixXd OperatorSpec::covariance(std::span<const double> times) const {
    const int m = static_cast<int>(times.size());
    Eigen::MatrixXd out(m, m);
    if (exact_) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= i; ++j) out(i, j) = out(j, i) = covariance_at(times[i], times[j]);
        return out;
    }
    std::vector<GridFunction> gs;
    gs.reserve(times.size());
    for (double t : times) gs.push_back(g_curve(t));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) out(i, j) = out(j, i) = inner(gs[i], gs[j]);
    return out;
}

const Eigen::MatrixXd& OperatorSpec::indicator_image() const {
    std::call_once(cache_->indicator_once, [&] {
        const int n = grid_.cells();
        Eigen::MatrixXd img(n, n + 1);
        img.col(0).setZero();
        // Column k is A applied to 1_{[0, k/n]}; build by accumulating columns of the map.
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
        for (int k = 1; k <= n; ++k) {
            acc += map_.col(k - 1);
            img.col(k) = acc;
        }
        cache_->indicator_image = std::move(img);
    });
    return cache_->indicator_image;
}

const Eigen::VectorXd& OperatorSpec::singular_values() const {
    std::call_once(cache_->svd_once, [&] {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(map_, Eigen::ComputeThinV);
        cache_->singular_values = svd.singularValues();
        cache_->svd_v = svd.matrixV();
    });
    return cache_->singular_values;
}

double OperatorSpec::operator_norm() const {
    const auto& sv = singular_values();
    return sv.size() > 0 ? sv[0] : 0.0;
}

std::vector<GridFunction> OperatorSpec::detect_kernel_svd(double tol) const {
    const auto& sv = singular_values();
    std::vector<GridFunction> out;
    double scale = std::sqrt(grid_.cell_width());
    for (int i = 0; i < sv.size(); ++i) {
        if (sv[i] <= tol)
            out.emplace_back(grid_, cache_->svd_v.col(i) / scale);  // L2-normalized direction
    }
    return out;
}

double OperatorSpec::restricted_inverse_norm() const {
    std::call_once(cache_->restricted_once, [&] {
        const int n = grid_.cells();
        const int m = static_cast<int>(kernel_basis_.size());
        if (m == 0) {
            cache_->restricted_sigma_min = singular_values()[n - 1];
            return;
        }
        // Euclidean-orthonormal basis of the complement of the kernel span;
        // directions agree with the L2 complement because the weight is uniform.
        Eigen::MatrixXd k = coeff_matrix(kernel_basis_);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(k);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd q_perp = q.rightCols(n - m);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(map_ * q_perp);
        cache_->restricted_sigma_min = svd.singularValues().minCoeff();
    });
    double sigma = cache_->restricted_sigma_min;
    if (sigma <= kInvertTol)
        throw std::runtime_error("restricted operator is numerically non-invertible");
    return 1.0 / sigma;
}

KernelDecomposition OperatorSpec::kernel_decomposition() const {
    KernelDecomposition out;
    if (kernel_basis_.empty()) return out;
    auto on = orthonormalize(kernel_basis_);
    const int n = grid_.cells();
    const int m = static_cast<int>(on.size());
    Eigen::MatrixXd b = coeff_matrix(on);

    // Interior jump pattern: row k is the vector of jumps at node (k+1)/n.
    Eigen::MatrixXd w = b.bottomRows(n - 1) - b.topRows(n - 1);
    double scale = b.cwiseAbs().maxCoeff();
    double jump_tol = 1e-12 * std::max(1.0, scale);
    auto row_active = [&](const Eigen::MatrixXd& rows, int k) {
        return rows.row(k).cwiseAbs().maxCoeff() > jump_tol;
    };

    std::vector<int> active;
    for (int k = 0; k < n - 1; ++k)
        if (row_active(w, k)) active.push_back(k);

    Eigen::MatrixXd step_coeff;  // columns: directions c with B c a step function
    std::vector<int> jump_rows;
    if (static_cast<int>(active.size()) <= kMaxStepJumps) {
        step_coeff = Eigen::MatrixXd::Identity(m, m);
        jump_rows = active;
    } else {
        // Hidden steps: find directions whose jump support is a small node set.
        Eigen::MatrixXd gram = w.transpose() * w;
        double gscale = std::max(gram.diagonal().maxCoeff(), 1e-300);
        auto null_space = [&](const Eigen::MatrixXd& g) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            int nullity = 0;
            while (nullity < m && es.eigenvalues()[nullity] <= 1e-12 * gscale) ++nullity;
            return std::pair{nullity, Eigen::MatrixXd(es.eigenvectors().leftCols(nullity))};
        };

        // Candidate rows ordered by norm: genuine step jumps dwarf the O(h)
        // adjacent differences of sampled smooth functions.
        std::vector<int> cand = active;
        std::sort(cand.begin(), cand.end(),
                  [&](int a2, int b2) { return w.row(a2).squaredNorm() > w.row(b2).squaredNorm(); });
        if (static_cast<int>(cand.size()) > kRowSearchCap) cand.resize(kRowSearchCap);

        Eigen::MatrixXd reduced = gram;
        std::set<int> removed;
        auto [nullity, basis0] = null_space(reduced);
        bool improved = true;
        while (improved && static_cast<int>(removed.size()) < kMaxStepJumps) {
            improved = false;
            for (int k : cand) {
                if (removed.count(k)) continue;
                Eigen::MatrixXd trial = reduced - w.row(k).transpose() * w.row(k);
                if (null_space(trial).first > nullity) {
                    reduced = std::move(trial);
                    removed.insert(k);
                    nullity = null_space(reduced).first;
                    improved = true;
                    break;
                }
            }
            if (improved) continue;
            for (size_t i = 0; i < cand.size() && !improved; ++i) {
                if (removed.count(cand[i])) continue;
                for (size_t j = i + 1; j < cand.size() && !improved; ++j) {
                    if (removed.count(cand[j])) continue;
                    Eigen::MatrixXd trial = reduced - w.row(cand[i]).transpose() * w.row(cand[i]) -
                                            w.row(cand[j]).transpose() * w.row(cand[j]);
                    if (null_space(trial).first > nullity) {
                        reduced = std::move(trial);
                        removed.insert(cand[i]);
                        removed.insert(cand[j]);
                        nullity = null_space(reduced).first;
                        improved = true;
                    }
                }
            }
        }
        step_coeff = null_space(reduced).second;
        // Jump rows of the recovered step subspace.
        if (step_coeff.cols() > 0) {
            Eigen::MatrixXd jumps = w * step_coeff;
            for (int k = 0; k < n - 1; ++k)
                if (row_active(jumps, k)) jump_rows.push_back(k);
        }
    }

    const int s = static_cast<int>(step_coeff.cols());
    for (int j = 0; j < s; ++j)
        out.step_basis.emplace_back(grid_, b * step_coeff.col(j));
    if (s < m) {
        // Orthonormal complement of the step directions inside the kernel.
        Eigen::MatrixXd full = Eigen::MatrixXd::Identity(m, m) -
                               (s > 0 ? Eigen::MatrixXd(step_coeff * step_coeff.transpose())
                                      : Eigen::MatrixXd::Zero(m, m));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(full);
        for (int j = 0; j < m; ++j)
            if (es.eigenvalues()[j] > 0.5)
                out.nonstep_basis.emplace_back(grid_, b * es.eigenvectors().col(j));
    }
    for (int k : jump_rows) out.jump_points.push_back(grid_.node(k + 1));
    std::sort(out.jump_points.begin(), out.jump_points.end());
    return out;
}

}  // namespace gilt
