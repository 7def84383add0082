#include "gilt/localtime.hpp"

#include "gilt/accumulators.hpp"
#include "gilt/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace gilt {

namespace {

constexpr double kConvergedRelTol = 0.18;  // calibrated on Wiener sweeps at n = 1024
constexpr double kConvergedAbsTol = 0.08;
constexpr int kFitPoints = 7;              // tail points entering the sqrt(eps) fit
constexpr int kPathBlock = 128;            // replicates per work block

// Intercept weights of the least-squares fit of estimates against {1, sqrt(eps)}
// over the last k schedule points.
Eigen::VectorXd intercept_weights(std::span<const double> schedule, int k) {
    Eigen::MatrixXd x(k, 2);
    const int off = static_cast<int>(schedule.size()) - k;
    for (int i = 0; i < k; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = std::sqrt(schedule[off + i]);
    }
    Eigen::MatrixXd normal = x.transpose() * x;
    Eigen::MatrixXd solved = normal.ldlt().solve(x.transpose());
    return solved.row(0).transpose();
}

struct SweepEngine {
    std::vector<double> schedule;
    Eigen::VectorXd fit_w;
    int fit_points;

    explicit SweepEngine(std::span<const double> sched)
        : schedule(sched.begin(), sched.end()),
          fit_points(std::min<int>(kFitPoints, static_cast<int>(sched.size()))) {
        fit_w = intercept_weights(schedule, fit_points);
    }

    // Estimates for one path at level u; node_weights encode the trapezoid rule.
    void estimates(const Eigen::VectorXd& values, double u, std::span<double> out) const {
        Eigen::ArrayXd sq = (values.array() - u).square();
        const int n = static_cast<int>(values.size()) - 1;
        const double h = 1.0 / n;
        for (size_t e = 0; e < schedule.size(); ++e) {
            double eps = schedule[e];
            Eigen::ArrayXd f = (-sq / (2.0 * eps)).exp() / std::sqrt(2.0 * std::numbers::pi * eps);
            double total = f.sum() - 0.5 * (f[0] + f[n]);
            out[e] = h * total;
        }
    }

    double extrapolate(std::span<const double> ests) const {
        double v = 0.0;
        const size_t off = ests.size() - static_cast<size_t>(fit_points);
        for (int i = 0; i < fit_points; ++i) v += fit_w[i] * ests[off + i];
        return std::max(0.0, v);
    }

    static bool converged_flag(std::span<const double> ests) {
        const size_t k = ests.size();
        double last = ests[k - 1], prev = ests[k - 2];
        double d = std::abs(last - prev);
        return d < kConvergedRelTol * std::abs(last) || d < kConvergedAbsTol;
    }
};

std::int64_t bin_index(double level, double bin_width) {
    return static_cast<std::int64_t>(std::floor(level / bin_width));
}

// Level-bin width for the u-integrated functionals. Histograms are sparse over
// the global lattice, which is equivalent to any padded dense grid: bins
// outside the occupied range carry zero mass.
constexpr double kUBinWidth = 0.02;

}  // namespace

double mollified_local_time(const PathSample& path, double u, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("mollified_local_time: eps must be > 0");
    const int n = path.grid.cells();
    const double h = path.grid.cell_width();
    Eigen::ArrayXd f =
        (-(path.values.array() - u).square() / (2.0 * eps)).exp() /
        std::sqrt(2.0 * std::numbers::pi * eps);
    return h * (f.sum() - 0.5 * (f[0] + f[n]));
}

std::vector<double> default_epsilon_schedule() {
    std::vector<double> s;
    for (int k = 4; k <= 12; ++k) s.push_back(std::pow(2.0, -k));
    return s;
}

LocalTimeEstimate epsilon_sweep(const PathSample& path, double u,
                                std::span<const double> schedule) {
    if (schedule.size() < 4)
        throw std::invalid_argument("epsilon_sweep: schedule needs at least 4 values");
    for (size_t i = 0; i + 1 < schedule.size(); ++i)
        if (!(schedule[i] > schedule[i + 1] && schedule[i + 1] > 0.0))
            throw std::invalid_argument("epsilon_sweep: schedule must be strictly decreasing, positive");
    SweepEngine engine(schedule);
    LocalTimeEstimate out;
    out.u = u;
    out.t_horizon = 1.0;
    out.epsilon_schedule.assign(schedule.begin(), schedule.end());
    out.estimates.resize(schedule.size());
    engine.estimates(path.values, u, out.estimates);
    out.extrapolated = engine.extrapolate(out.estimates);
    out.converged = SweepEngine::converged_flag(out.estimates);
    return out;
}

OccupationDensity occupation_histogram(const PathSample& path, double bin_width) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("occupation_histogram: bin width must be > 0");
    const int n = path.grid.cells();
    const double h = path.grid.cell_width();
    std::vector<std::int64_t> idx(n);
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
    for (int i = 0; i < n; ++i) {
        double mid = 0.5 * (path.values[i] + path.values[i + 1]);
        idx[i] = bin_index(mid, bin_width);
        lo = std::min(lo, idx[i]);
        hi = std::max(hi, idx[i]);
    }
    OccupationDensity out;
    const std::int64_t bins = hi - lo + 1;
    out.masses.assign(bins, 0.0);
    for (int i = 0; i < n; ++i) out.masses[idx[i] - lo] += h / bin_width;
    out.bin_edges.resize(bins + 1);
    for (std::int64_t b = 0; b <= bins; ++b)
        out.bin_edges[b] = static_cast<double>(lo + b) * bin_width;
    return out;
}

namespace {

struct McTally {
    std::vector<RunningMoments> stats;  // one per requested power
    std::int64_t rejected = 0;
};

// Shared driver: per replicate path -> extrapolated local time -> powers.
std::vector<MomentEstimate> sweep_moments(
    const std::function<Eigen::MatrixXd(std::uint64_t, int)>& path_block, std::span<const int> ps,
    double u, std::int64_t reps, std::uint64_t seed) {
    for (int p : ps)
        if (p < 1) throw std::invalid_argument("moment_mc: power must be >= 1");
    if (reps < 1) throw std::invalid_argument("moment_mc: reps must be >= 1");
    auto schedule = default_epsilon_schedule();
    SweepEngine engine(schedule);

    const std::int64_t n_blocks = (reps + kPathBlock - 1) / kPathBlock;
    std::vector<McTally> tallies(n_blocks);
    parallel::for_blocks(n_blocks, [&](std::int64_t blk) {
        std::int64_t lo = blk * kPathBlock;
        int count = static_cast<int>(std::min<std::int64_t>(kPathBlock, reps - lo));
        Eigen::MatrixXd paths = path_block(static_cast<std::uint64_t>(lo), count);
        McTally tally;
        tally.stats.resize(ps.size());
        std::vector<double> ests(schedule.size());
        for (int r = 0; r < count; ++r) {
            Eigen::VectorXd row = paths.row(r);
            engine.estimates(row, u, ests);
            if (!SweepEngine::converged_flag(ests)) {
                ++tally.rejected;
                continue;
            }
            double l = engine.extrapolate(ests);
            for (size_t j = 0; j < ps.size(); ++j) tally.stats[j].add(std::pow(l, ps[j]));
        }
        tallies[blk] = std::move(tally);
    });

    std::vector<RunningMoments> total(ps.size());
    std::int64_t rejected = 0;
    for (auto& t : tallies) {
        for (size_t j = 0; j < ps.size(); ++j) total[j].combine(t.stats[j]);
        rejected += t.rejected;
    }
    std::vector<MomentEstimate> out;
    for (size_t j = 0; j < ps.size(); ++j) {
        MomentEstimate e;
        e.value = total[j].mean;
        e.std_error = total[j].std_error();
        e.n_samples = reps;
        e.seed = seed;
        e.n_rejected = rejected;
        e.valid = rejected <= static_cast<std::int64_t>(0.05 * static_cast<double>(reps));
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

namespace {
// The GEMM route needs the cached indicator image; build it before the
// parallel region so worker threads never race on first use.
void warm_cache(const OperatorSpec& a) {
    if (!a.structured_action()) a.indicator_image();
}
}  // namespace

std::vector<MomentEstimate> moment_mc_multi(const OperatorSpec& a, std::span<const int> ps,
                                            double u, std::int64_t reps, std::uint64_t seed) {
    warm_cache(a);
    auto block = [&a, seed](std::uint64_t stream0, int count) {
        return batch_integrator_paths(a, seed, stream0, count);
    };
    return sweep_moments(block, ps, u, reps, seed);
}

MomentEstimate moment_mc(const OperatorSpec& a, int p, double u, std::int64_t reps,
                         std::uint64_t seed) {
    int ps[1] = {p};
    return moment_mc_multi(a, ps, u, reps, seed).front();
}

std::vector<MomentEstimate> y_moment_mc_multi(std::span<const double> jump_points, const Grid& g,
                                              std::span<const int> ps, std::int64_t reps,
                                              std::uint64_t seed) {
    std::vector<double> jumps(jump_points.begin(), jump_points.end());
    auto block = [jumps, g, seed](std::uint64_t stream0, int count) {
        return batch_y_paths(jumps, g, seed, stream0, count);
    };
    return sweep_moments(block, ps, 0.0, reps, seed);
}

MomentEstimate u_integrated_moment_mc(const OperatorSpec& a, int q, std::int64_t reps,
                                      std::uint64_t seed, double bin_width) {
    if (q < 1) throw std::invalid_argument("u_integrated_moment_mc: q must be >= 1");
    if (reps < 1) throw std::invalid_argument("u_integrated_moment_mc: reps must be >= 1");
    if (!(bin_width > 0.0)) throw std::invalid_argument("u_integrated_moment_mc: bin width must be > 0");
    warm_cache(a);
    const int n = a.grid().cells();
    const double h = a.grid().cell_width();

    const std::int64_t n_blocks = (reps + kPathBlock - 1) / kPathBlock;
    std::vector<RunningMoments> block_stats(n_blocks);
    parallel::for_blocks(n_blocks, [&](std::int64_t blk) {
        std::int64_t lo = blk * kPathBlock;
        int count = static_cast<int>(std::min<std::int64_t>(kPathBlock, reps - lo));
        Eigen::MatrixXd paths = batch_integrator_paths(a, seed, static_cast<std::uint64_t>(lo), count);
        RunningMoments stats;
        std::unordered_map<std::int64_t, std::int64_t> counts;
        for (int r = 0; r < count; ++r) {
            counts.clear();
            for (int i = 0; i < n; ++i) {
                double mid = 0.5 * (paths(r, i) + paths(r, i + 1));
                ++counts[bin_index(mid, bin_width)];
            }
            // int rho^q du estimated by q-point coincidence counting: the
            // falling factorial drops self-pairs, whose inflation would bias
            // the square of a sampled density. q = 1 collapses to h * n,
            // conservation made exact.
            double value = 0.0;
            if (q == 1) {
                value = h * static_cast<double>(n);
            } else {
                for (const auto& [bin, c] : counts) {
                    double prod = 1.0;
                    for (int j = 0; j < q; ++j) prod *= static_cast<double>(c - j);
                    value += prod;
                }
                value *= std::pow(h, q) / std::pow(bin_width, q - 1);
            }
            stats.add(value);
        }
        block_stats[blk] = stats;
    });

    RunningMoments total;
    for (auto& s : block_stats) total.combine(s);
    MomentEstimate e;
    e.value = total.mean;
    e.std_error = total.std_error();
    e.n_samples = reps;
    e.seed = seed;
    return e;
}

MomentEstimate l2m_distance(const OperatorSpec& a_n, const OperatorSpec& a, int m,
                            std::int64_t reps, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("l2m_distance: m must be >= 1");
    if (a_n.grid() != a.grid()) throw std::invalid_argument("l2m_distance: grid mismatch");
    warm_cache(a_n);
    warm_cache(a);
    const int n = a.grid().cells();
    const double h = a.grid().cell_width();
    const int power = 2 * m;

    const std::int64_t n_blocks = (reps + kPathBlock - 1) / kPathBlock;
    std::vector<RunningMoments> block_stats(n_blocks);
    parallel::for_blocks(n_blocks, [&](std::int64_t blk) {
        std::int64_t lo = blk * kPathBlock;
        int count = static_cast<int>(std::min<std::int64_t>(kPathBlock, reps - lo));
        // Shared noise streams: replicate r uses stream lo + r under both operators.
        Eigen::MatrixXd p1 = batch_integrator_paths(a_n, seed, static_cast<std::uint64_t>(lo), count);
        Eigen::MatrixXd p2 = batch_integrator_paths(a, seed, static_cast<std::uint64_t>(lo), count);
        RunningMoments stats;
        std::unordered_map<std::int64_t, double> delta;
        for (int r = 0; r < count; ++r) {
            delta.clear();
            for (int i = 0; i < n; ++i) {
                double mid1 = 0.5 * (p1(r, i) + p1(r, i + 1));
                double mid2 = 0.5 * (p2(r, i) + p2(r, i + 1));
                delta[bin_index(mid1, kUBinWidth)] += 1.0;
                delta[bin_index(mid2, kUBinWidth)] -= 1.0;
            }
            double value = 0.0;
            for (const auto& [bin, d] : delta) value += std::pow(d, power);
            value *= std::pow(h / kUBinWidth, power) * kUBinWidth;
            stats.add(value);
        }
        block_stats[blk] = stats;
    });

    RunningMoments total;
    for (auto& s : block_stats) total.combine(s);
    MomentEstimate e;
    e.value = total.mean;
    e.std_error = total.std_error();
    e.n_samples = reps;
    e.seed = seed;
    return e;
}

}  // namespace gilt
