#include "gilt/quadrature.hpp"

#include "gilt/accumulators.hpp"
#include "gilt/gram.hpp"
#include "gilt/parallel.hpp"
#include "gilt/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gilt {

namespace {

constexpr int kMaxSimplexDim = 8;          // Gram conditioning limit in double precision
constexpr std::int64_t kBlockSamples = 8192;
constexpr double kRejectBudget = 0.01;

}  // namespace

MomentEstimate simplex_inv_sqrt_gram(const OperatorSpec& a, int p, std::int64_t n_samples,
                                     std::uint64_t seed) {
    if (p < 1 || p > kMaxSimplexDim)
        throw std::invalid_argument("simplex_inv_sqrt_gram: p must be in 1..8");
    if (n_samples < 1000)
        throw std::invalid_argument("simplex_inv_sqrt_gram: need at least 1e3 samples");

    const double weight_const =
        std::pow(std::numbers::pi, 0.5 * p) / std::tgamma(0.5 * p + 1.0);

    const std::int64_t n_blocks = (n_samples + kBlockSamples - 1) / kBlockSamples;
    std::vector<RunningMoments> block_stats(n_blocks);
    std::vector<std::int64_t> block_rejects(n_blocks, 0);

    parallel::for_blocks(n_blocks, [&](std::int64_t blk) {
        rng::Philox gen(seed, static_cast<std::uint64_t>(blk));
        std::int64_t lo = blk * kBlockSamples;
        std::int64_t hi = std::min<std::int64_t>(lo + kBlockSamples, n_samples);
        RunningMoments stats;
        std::int64_t rejects = 0;
        std::vector<double> x(p + 1);
        for (std::int64_t s = lo; s < hi; ++s) {
            double total = 0.0;
            for (int i = 0; i < p; ++i) {
                x[i] = gen.next_gamma_half();
                total += x[i];
            }
            x[p] = gen.next_exponential();
            total += x[p];
            double spacing_prod = 1.0;
            for (int i = 0; i < p; ++i) {
                x[i] /= total;
                spacing_prod *= x[i];
            }
            x[p] /= total;

            Eigen::MatrixXd g = a.increment_gram(std::span<const double>(x.data(), p));
            GramReport det = gram_det(g);
            if (det.clamped) {
                ++rejects;
                continue;
            }
            stats.add(weight_const * std::sqrt(spacing_prod / det.value));
        }
        block_stats[blk] = stats;
        block_rejects[blk] = rejects;
    });

    RunningMoments total;
    std::int64_t rejected = 0;
    for (std::int64_t b = 0; b < n_blocks; ++b) {
        total.combine(block_stats[b]);
        rejected += block_rejects[b];
    }

    MomentEstimate est;
    est.value = total.mean;
    est.std_error = total.std_error();
    est.n_samples = n_samples;
    est.seed = seed;
    est.method = "monte_carlo";
    est.n_rejected = rejected;
    est.weight_variance = total.variance();
    est.valid = rejected <= static_cast<std::int64_t>(kRejectBudget * static_cast<double>(n_samples));
    return est;
}

MomentEstimate moment_via_quadrature(const OperatorSpec& a, int p, std::int64_t n_samples,
                                     std::uint64_t seed) {
    MomentEstimate est = simplex_inv_sqrt_gram(a, p, n_samples, seed);
    double scale = std::tgamma(p + 1.0) / std::pow(2.0 * std::numbers::pi, 0.5 * p);
    est.value *= scale;
    est.std_error *= scale;
    est.weight_variance *= scale * scale;
    return est;
}

double wiener_moment_closed_form(int p) {
    if (p < 1) throw std::invalid_argument("wiener_moment_closed_form: p must be >= 1");
    return std::tgamma(p + 1.0) / (std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * p + 1.0));
}

double bridge_moment_closed_form(int k) {
    if (k < 1) throw std::invalid_argument("bridge_moment_closed_form: k must be >= 1");
    return std::pow(2.0, 0.5 * k) * std::tgamma(0.5 * k + 1.0);
}

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// Sum over compositions p = n_0 + ... + n_N of
//   multinomial(p; n_0..n_N) * prod_j h_j^{n_j/2} * bridge_moment(n_j)
void composition_sum(std::span<const double> lengths, size_t seg, int remaining, double factor,
                     double& total) {
    if (seg + 1 == lengths.size()) {
        int nj = remaining;
        double bm = nj == 0 ? 1.0 : bridge_moment_closed_form(nj);
        total += factor / factorial(nj) * std::pow(lengths[seg], 0.5 * nj) * bm;
        return;
    }
    for (int nj = 0; nj <= remaining; ++nj) {
        double bm = nj == 0 ? 1.0 : bridge_moment_closed_form(nj);
        composition_sum(lengths, seg + 1, remaining - nj,
                        factor / factorial(nj) * std::pow(lengths[seg], 0.5 * nj) * bm, total);
    }
}

}  // namespace

double y_moment_closed_form(std::span<const double> jump_points, int p) {
    if (p < 1) throw std::invalid_argument("y_moment_closed_form: p must be >= 1");
    double prev = 0.0;
    std::vector<double> lengths;
    for (double s : jump_points) {
        if (!(s > prev && s < 1.0))
            throw std::invalid_argument("y_moment_closed_form: jump points must be sorted in (0,1)");
        lengths.push_back(s - prev);
        prev = s;
    }
    lengths.push_back(1.0 - prev);
    double total = 0.0;
    composition_sum(lengths, 0, p, 1.0, total);
    return factorial(p) * total;
}

double u_integrated_wiener_closed_form(int q) {
    if (q < 1) throw std::invalid_argument("u_integrated_wiener_closed_form: q must be >= 1");
    return std::tgamma(q + 1.0) /
           (std::pow(2.0, 0.5 * (q - 1)) * std::tgamma(0.5 * (q + 3.0)));
}

}  // namespace gilt
