#include "gilt/accumulators.hpp"
#include "gilt/sampler.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace gilt;

TEST_SUITE("sampler") {

TEST_CASE("noise pairing: zero function, determinism, linearity") {
    Grid g(256);
    NoiseVector noise = sample_noise(g, 77);
    CHECK(pair_noise(noise, zero_function(g)) == 0.0);

    NoiseVector again = sample_noise(g, 77);
    CHECK((noise.components - again.components).cwiseAbs().maxCoeff() == 0.0);

    GridFunction f = indicator(g, 0.0, 0.5), h = indicator(g, 0.25, 1.0);
    double lhs = pair_noise(noise, 2.0 * f - 0.7 * h);
    double rhs = 2.0 * pair_noise(noise, f) - 0.7 * pair_noise(noise, h);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("pairing variance realizes the inner product") {
    Grid g(64);
    GridFunction one = indicator(g, 1.0);
    GridFunction half = indicator(g, 0.5);
    RunningMoments v1, cross;
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
        NoiseVector noise = sample_noise(g, 5150, r);
        double p1 = pair_noise(noise, one);
        double ph = pair_noise(noise, half);
        v1.add(p1 * p1);
        cross.add(p1 * ph);
    }
    CHECK(std::abs(v1.mean - 1.0) <= 3.0 * v1.std_error());
    CHECK(std::abs(cross.mean - 0.5) <= 3.0 * cross.std_error());
}

TEST_CASE("integrator paths: zero operator, variance, bridge pinning") {
    Grid g(128);
    NoiseVector noise = sample_noise(g, 31);
    OperatorSpec zero = OperatorSpec::dense(g, Eigen::MatrixXd::Zero(128, 128));
    PathSample zp = sample_integrator(zero, noise);
    CHECK(zp.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zp.values[0] == 0.0);

    OperatorSpec id = OperatorSpec::identity(g);
    RunningMoments var_end;
    for (int r = 0; r < 50000; ++r) {
        NoiseVector nr = sample_noise(g, 33, r);
        PathSample p = sample_integrator(id, nr);
        var_end.add(p.values[128] * p.values[128]);
    }
    CHECK(std::abs(var_end.mean - 1.0) <= 3.0 * var_end.std_error());

    // bridge operator: g(1) = 0, so x(1) vanishes for every noise
    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    for (int r = 0; r < 20; ++r) {
        PathSample p = sample_integrator(br, sample_noise(g, 37, r));
        CHECK(p.values[128] == 0.0);
    }
}

TEST_CASE("coupling: same noise under two operators differs by the difference path") {
    Grid g(96);
    OperatorSpec a1 = OperatorSpec::scaled_identity(g, 1.5);
    OperatorSpec a2 = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    OperatorSpec diff = OperatorSpec::dense(g, a1.map() - a2.map());
    NoiseVector noise = sample_noise(g, 41);
    PathSample p1 = sample_integrator(a1, noise);
    PathSample p2 = sample_integrator(a2, noise);
    PathSample pd = sample_integrator(diff, noise);
    CHECK(((p1.values - p2.values) - pd.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batched paths match the per-replicate convention") {
    Grid g(64);
    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    Eigen::MatrixXd batch = batch_integrator_paths(br, 91, 5, 3);
    for (int r = 0; r < 3; ++r) {
        PathSample p = sample_integrator(br, sample_noise(g, 91, 5 + r));
        CHECK((batch.row(r).transpose() - p.values).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("wiener and bridge basics") {
    Grid g(512);
    PathSample w = sample_wiener(g, 7);
    CHECK(w.values[0] == 0.0);
    PathSample b = sample_bridge(g, 7);
    CHECK(b.values[512] == 0.0);

    RunningMoments mid_var;
    for (int r = 0; r < 20000; ++r) {
        PathSample br = sample_bridge(g, 100, r);
        double v = br.values[256];
        mid_var.add(v * v);
    }
    CHECK(std::abs(mid_var.mean - 0.25) <= 3.0 * mid_var.std_error());
}

TEST_CASE("wiener increments over disjoint cells are uncorrelated") {
    Grid g(64);
    RunningMoments cross;
    for (int r = 0; r < 50000; ++r) {
        PathSample w = sample_wiener(g, 55, r);
        double d1 = w.values[16] - w.values[0];
        double d2 = w.values[48] - w.values[32];
        cross.add(d1 * d2);
    }
    CHECK(std::abs(cross.mean) <= 3.0 * cross.std_error());
}

TEST_CASE("y process: pinning and per-segment bridge variance") {
    Grid g(256);
    std::vector<double> jumps{0.5};
    RunningMoments quarter_var;
    for (int r = 0; r < 20000; ++r) {
        PathSample y = sample_y(jumps, g, 200, r);
        CHECK(y.values[0] == 0.0);
        CHECK(y.values[128] == 0.0);
        CHECK(y.values[256] == 0.0);
        double v = y.values[64];
        quarter_var.add(v * v);
    }
    // bridge on [0, 1/2] at its midpoint: t (s1 - t)/s1 = 0.125
    CHECK(std::abs(quarter_var.mean - 0.125) <= 3.0 * quarter_var.std_error());

    CHECK_THROWS_AS(sample_y(std::vector<double>{0.5, 0.25}, g, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_y(std::vector<double>{1.0}, g, 1), std::invalid_argument);
}

TEST_CASE("factorization sampler agrees with the pairing sampler in distribution") {
    Grid g(48);
    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    const int reps = 20000;
    std::vector<double> a(reps), b(reps);
    RunningMoments va, vb;
    for (int r = 0; r < reps; ++r) {
        a[r] = sample_integrator(br, sample_noise(g, 301, r)).values[24];
        b[r] = sample_integrator_by_factorization(br, 302, r).values[24];
        va.add(a[r] * a[r]);
        vb.add(b[r] * b[r]);
    }
    // marginal variances agree
    CHECK(std::abs(va.mean - vb.mean) <= 3.0 * std::hypot(va.std_error(), vb.std_error()));
    // two-sample Kolmogorov-Smirnov on the midpoint marginal
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] <= b[ib])
            ++ia;
        else
            ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / a.size() -
                                 static_cast<double>(ib) / b.size()));
    }
    double threshold = 2.0 * std::sqrt(2.0 / reps);  // ~ alpha 1e-3
    CHECK(d < threshold);
}

}  // TEST_SUITE
