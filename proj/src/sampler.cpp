#include "gilt/sampler.hpp"

#include "gilt/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gilt {

NoiseVector sample_noise(const Grid& g, std::uint64_t seed, std::uint64_t stream) {
    rng::Philox gen(seed, stream);
    Eigen::VectorXd z(g.cells());
    for (int i = 0; i < g.cells(); ++i) z[i] = gen.next_normal();
    double scale = 1.0 / std::sqrt(g.cell_width());
    return NoiseVector{g, scale * z, seed, stream};
}

double pair_noise(const NoiseVector& noise, const GridFunction& f) {
    if (noise.grid != f.grid()) throw std::invalid_argument("pair_noise: grid mismatch");
    return noise.grid.cell_width() * f.coeffs().dot(noise.components);
}

PathSample sample_integrator(const OperatorSpec& a, const NoiseVector& noise) {
    if (noise.grid != a.grid()) throw std::invalid_argument("sample_integrator: grid mismatch");
    const double h = a.grid().cell_width();
    Eigen::VectorXd values = h * (a.indicator_image().transpose() * noise.components);
    values[0] = 0.0;
    return PathSample{a.grid(), std::move(values), noise.seed, a.label()};
}

PathSample sample_wiener(const Grid& g, std::uint64_t seed, std::uint64_t stream) {
    rng::Philox gen(seed, stream);
    const double sqrt_h = std::sqrt(g.cell_width());
    Eigen::VectorXd values(g.node_count());
    values[0] = 0.0;
    for (int i = 0; i < g.cells(); ++i) values[i + 1] = values[i] + sqrt_h * gen.next_normal();
    return PathSample{g, std::move(values), seed, "wiener"};
}

PathSample sample_bridge(const Grid& g, std::uint64_t seed, std::uint64_t stream) {
    PathSample w = sample_wiener(g, seed, stream);
    double endpoint = w.values[g.cells()];
    for (int k = 0; k <= g.cells(); ++k) w.values[k] -= g.node(k) * endpoint;
    w.values[g.cells()] = 0.0;
    w.label = "bridge";
    return w;
}

namespace {

std::vector<int> segment_nodes(std::span<const double> jump_points, const Grid& g) {
    std::vector<int> cuts{0};
    for (double s : jump_points) {
        int k = g.snap(s);
        if (k <= cuts.back() || k >= g.cells())
            throw std::invalid_argument("jump points must be sorted, distinct, strictly inside (0,1)");
        cuts.push_back(k);
    }
    cuts.push_back(g.cells());
    return cuts;
}

// Pinned segment construction shared by sample_y and its batched variant.
void fill_y_path(const std::vector<int>& cuts, const Grid& g, rng::Philox& gen,
                 Eigen::Ref<Eigen::VectorXd> values) {
    const double sqrt_h = std::sqrt(g.cell_width());
    values[0] = 0.0;
    for (size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        int lo = cuts[seg], hi = cuts[seg + 1];
        double cum = 0.0;
        for (int i = lo + 1; i <= hi; ++i) {
            cum += sqrt_h * gen.next_normal();
            values[i] = cum;
        }
        double len = static_cast<double>(hi - lo);
        for (int i = lo + 1; i <= hi; ++i)
            values[i] -= (static_cast<double>(i - lo) / len) * cum;
        values[hi] = 0.0;
    }
}

}  // namespace

PathSample sample_y(std::span<const double> jump_points, const Grid& g, std::uint64_t seed,
                    std::uint64_t stream) {
    auto cuts = segment_nodes(jump_points, g);
    rng::Philox gen(seed, stream);
    Eigen::VectorXd values(g.node_count());
    fill_y_path(cuts, g, gen, values);
    return PathSample{g, std::move(values), seed, "y"};
}

PathSample sample_integrator_by_factorization(const OperatorSpec& a, std::uint64_t seed,
                                              std::uint64_t stream) {
    const Grid& g = a.grid();
    const int n = g.cells();
    std::vector<double> nodes(n);
    for (int k = 1; k <= n; ++k) nodes[k - 1] = g.node(k);
    Eigen::MatrixXd cov = a.covariance(nodes);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    rng::Philox gen(seed, stream);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = gen.next_normal();
    Eigen::VectorXd path = es.eigenvectors() * scale.asDiagonal() * z;
    Eigen::VectorXd values(g.node_count());
    values[0] = 0.0;
    values.tail(n) = path;
    return PathSample{g, std::move(values), seed, a.label() + "_factorized"};
}

Eigen::MatrixXd batch_integrator_paths(const OperatorSpec& a, std::uint64_t seed,
                                       std::uint64_t stream0, int count) {
    const Grid& g = a.grid();
    const int n = g.cells();
    const double sqrt_h = std::sqrt(g.cell_width());
    Eigen::MatrixXd z(n, count);
    for (int r = 0; r < count; ++r) {
        rng::Philox gen(seed, stream0 + static_cast<std::uint64_t>(r));
        for (int i = 0; i < n; ++i) z(i, r) = gen.next_normal();
    }
    Eigen::MatrixXd paths(count, g.node_count());
    if (const StructuredAction* act = a.structured_action()) {
        // x = base * cumsum + sum_k coef_k (b_k, xi) B_k(node), O(n) per path.
        paths.col(0).setZero();
        for (int r = 0; r < count; ++r) {
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                cum += sqrt_h * z(i, r);
                paths(r, i + 1) = act->base * cum;
            }
        }
        for (const auto& u : act->updates) {
            Eigen::VectorXd proj = sqrt_h * (z.transpose() * u.fn.coeffs());  // (b_k, xi) per path
            paths.noalias() += (u.coef * proj) * u.node_integral.transpose();
        }
        paths.col(0).setZero();
        return paths;
    }
    // pair(noise, A 1_{[0,t_k]}) column-batched: sqrt(h) * (A Ind)^T Z.
    paths = (sqrt_h * (a.indicator_image().transpose() * z)).transpose();
    paths.col(0).setZero();
    return paths;  // count x node_count
}

Eigen::MatrixXd batch_y_paths(std::span<const double> jump_points, const Grid& g,
                              std::uint64_t seed, std::uint64_t stream0, int count) {
    auto cuts = segment_nodes(jump_points, g);
    Eigen::MatrixXd paths(count, g.node_count());
    Eigen::VectorXd row(g.node_count());
    for (int r = 0; r < count; ++r) {
        rng::Philox gen(seed, stream0 + static_cast<std::uint64_t>(r));
        fill_y_path(cuts, g, gen, row);
        paths.row(r) = row;
    }
    return paths;
}

}  // namespace gilt
