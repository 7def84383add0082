#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace gilt {

/// Uniform partition of [0,1] into n cells with nodes k/n, k = 0..n.
/// All time arguments elsewhere in the library snap to the nearest node,
/// so inner products of step functions are exact.
class Grid {
public:
    explicit Grid(int n) : n_(n), h_(1.0 / n) {
        if (n < 1) throw std::invalid_argument("Grid: cell count must be >= 1");
    }

    int cells() const { return n_; }
    int node_count() const { return n_ + 1; }
    double cell_width() const { return h_; }
    double node(int k) const { return k == n_ ? 1.0 : k * h_; }

    /// Index of the nearest node to t. Rejects t outside [0,1].
    int snap(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("Grid::snap: t outside [0,1]");
        int k = static_cast<int>(std::lround(t * n_));
        if (k < 0) k = 0;
        if (k > n_) k = n_;
        return k;
    }

    /// Distance moved by snapping; > 0 when t was not node-aligned.
    double snap_distance(double t) const { return std::abs(t - node(snap(t))); }

    bool operator==(const Grid& o) const { return n_ == o.n_; }
    bool operator!=(const Grid& o) const { return n_ != o.n_; }

private:
    int n_;
    double h_;
};

/// Step function on a Grid, one coefficient per cell. Immutable value type;
/// safe to share across threads.
class GridFunction {
public:
    GridFunction(Grid grid, Eigen::VectorXd coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != grid_.cells())
            throw std::invalid_argument("GridFunction: coefficient count must equal cell count");
    }

    const Grid& grid() const { return grid_; }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    double squared_norm() const { return grid_.cell_width() * coeffs_.squaredNorm(); }
    double norm() const { return std::sqrt(squared_norm()); }

    GridFunction operator+(const GridFunction& o) const { return with(coeffs_ + o.checked(grid_)); }
    GridFunction operator-(const GridFunction& o) const { return with(coeffs_ - o.checked(grid_)); }
    GridFunction operator*(double a) const { return with(a * coeffs_); }
    friend GridFunction operator*(double a, const GridFunction& f) { return f * a; }

private:
    GridFunction with(Eigen::VectorXd c) const { return GridFunction(grid_, std::move(c)); }
    const Eigen::VectorXd& checked(const Grid& g) const {
        if (grid_ != g) throw std::invalid_argument("GridFunction: grid mismatch");
        return coeffs_;
    }

    Grid grid_;
    Eigen::VectorXd coeffs_;
};

inline Grid make_uniform_grid(int n) { return Grid(n); }

inline GridFunction zero_function(const Grid& g) {
    return GridFunction(g, Eigen::VectorXd::Zero(g.cells()));
}

inline GridFunction constant_function(const Grid& g, double value) {
    return GridFunction(g, Eigen::VectorXd::Constant(g.cells(), value));
}

/// 1_{[0,t]} with t snapped to the nearest node.
inline GridFunction indicator(const Grid& g, double t) {
    int k = g.snap(t);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(g.cells());
    c.head(k).setOnes();
    return GridFunction(g, std::move(c));
}

/// 1_{[a,b]} with both endpoints snapped.
inline GridFunction indicator(const Grid& g, double a, double b) {
    int ka = g.snap(a), kb = g.snap(b);
    if (ka > kb) throw std::invalid_argument("indicator: need a <= b");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(g.cells());
    c.segment(ka, kb - ka).setOnes();
    return GridFunction(g, std::move(c));
}

/// L2 projection of 1_{[0,t]} onto grid step functions: the partially covered
/// cell keeps its fractional coverage. Used where continuous-time evaluation
/// matters (covariance kernels); ordinary indicator() snaps instead.
inline GridFunction indicator_projection(const Grid& g, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("indicator_projection: t outside [0,1]");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(g.cells());
    double scaled = t * g.cells();
    int full = static_cast<int>(std::floor(scaled));
    if (full >= g.cells()) full = g.cells();
    c.head(full).setOnes();
    if (full < g.cells()) c[full] = scaled - full;
    return GridFunction(g, std::move(c));
}

/// Exact L2 inner product of two step functions on the same grid.
inline double inner(const GridFunction& f, const GridFunction& g) {
    if (f.grid() != g.grid()) throw std::invalid_argument("inner: grid mismatch");
    return f.grid().cell_width() * f.coeffs().dot(g.coeffs());
}

/// Values of the running integral s -> int_0^s f at every node.
/// Piecewise linear in s; exact for step functions.
inline Eigen::VectorXd running_integral(const GridFunction& f) {
    const int n = f.grid().cells();
    Eigen::VectorXd out(n + 1);
    out[0] = 0.0;
    double h = f.grid().cell_width();
    for (int i = 0; i < n; ++i) out[i + 1] = out[i] + h * f.coeffs()[i];
    return out;
}

}  // namespace gilt
