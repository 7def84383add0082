#include "gilt/gram.hpp"
#include "gilt/rng.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

using namespace gilt;

namespace {

GridFunction random_fn(const Grid& g, rng::Philox& gen) {
    Eigen::VectorXd c(g.cells());
    for (int i = 0; i < g.cells(); ++i) c[i] = gen.next_normal();
    return GridFunction(g, std::move(c));
}

}  // namespace

TEST_SUITE("gram") {

TEST_CASE("gram determinant basics") {
    Grid g(16);
    auto on = orthonormalize({indicator(g, 0.0, 0.5), indicator(g, 0.5, 1.0)});
    CHECK(gram_det(on).value == doctest::Approx(1.0).epsilon(1e-12));

    GridFunction f = indicator(g, 0.0, 0.75);
    std::vector<GridFunction> dep{f, 2.0 * f};
    GramReport rep = gram_det(dep);
    CHECK(rep.value == 0.0);
    CHECK(rep.clamped);

    std::vector<GridFunction> tri{indicator(g, 0.25), indicator(g, 0.5), indicator(g, 1.0)};
    CHECK(gram_det(tri).value == doctest::Approx(0.03125).epsilon(1e-12));

    CHECK_THROWS_AS(gram_det(std::vector<GridFunction>{}), std::invalid_argument);
}

TEST_CASE("gram determinant is permutation invariant") {
    Grid g(32);
    rng::Philox gen(3, 9);
    std::vector<GridFunction> vs;
    for (int i = 0; i < 5; ++i) vs.push_back(random_fn(g, gen));
    double base = gram_det(vs).value;
    std::vector<GridFunction> perm{vs[3], vs[0], vs[4], vs[2], vs[1]};
    CHECK(gram_det(perm).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("appending a dependent vector clamps to zero") {
    Grid g(32);
    rng::Philox gen(5, 1);
    std::vector<GridFunction> vs;
    for (int i = 0; i < 3; ++i) vs.push_back(random_fn(g, gen));
    GridFunction mix = 0.5 * vs[0] - 1.25 * vs[2];
    std::vector<GridFunction> ext = vs;
    ext.push_back(mix);
    GramReport rep = gram_det(ext);
    CHECK(rep.value == 0.0);
    CHECK(rep.clamped);
}

TEST_CASE("operator bound gap: isometry and scaling are tight") {
    Grid g(12);
    // rotation built from an orthogonal matrix: isometric, bound constant 1
    rng::Philox gen(7, 2);
    Eigen::MatrixXd m(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) m(i, j) = gen.next_normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    OperatorSpec rot = OperatorSpec::dense(g, q);
    auto on = orthonormalize({indicator(g, 0.0, 0.5), indicator(g, 0.5, 1.0)});
    CHECK(std::abs(operator_bound_gap(rot, on)) < 1e-10);

    OperatorSpec half = OperatorSpec::scaled_identity(g, 0.5);
    std::vector<GridFunction> vs{random_fn(g, gen), random_fn(g, gen)};
    CHECK(std::abs(operator_bound_gap(half, vs)) < 1e-10 * std::max(1.0, gram_det(vs).value));
}

TEST_CASE("operator bound gap is nonnegative for random instances") {
    Grid g(16);
    for (int it = 0; it < 300; ++it) {
        rng::Philox gen(11, it);
        Eigen::MatrixXd a(16, 16), b(16, 16);
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                a(i, j) = gen.next_normal();
                b(i, j) = gen.next_normal();
            }
        Eigen::MatrixXd q1 = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
        Eigen::MatrixXd q2 = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ();
        Eigen::VectorXd sigma(16);
        for (int i = 0; i < 16; ++i) sigma[i] = 0.2 + 4.0 * gen.next_uniform();
        OperatorSpec op = OperatorSpec::dense(g, q1 * sigma.asDiagonal() * q2.transpose());
        int k = 1 + static_cast<int>(gen.next_u64() % 6);
        std::vector<GridFunction> vs;
        for (int i = 0; i < k; ++i) vs.push_back(random_fn(g, gen));
        double gap = operator_bound_gap(op, vs);
        CHECK(gap >= -1e-9 * std::max(1.0, gram_det(vs).value));
    }
}

TEST_CASE("projection identity") {
    Grid g(24);
    // L orthogonal to span(gs): both sides reduce to G(gs)
    auto l_basis = orthonormalize({indicator(g, 0.0, 0.25)});
    std::vector<GridFunction> gs{indicator(g, 0.25, 0.5), indicator(g, 0.5, 1.0)};
    CHECK(projection_identity_residual(l_basis, gs) < 1e-12);

    // some g inside L: both sides vanish
    std::vector<GridFunction> gs2{l_basis[0] * 2.5, indicator(g, 0.5, 1.0)};
    CHECK(projection_identity_residual(l_basis, gs2) < 1e-12);

    for (int it = 0; it < 200; ++it) {
        rng::Philox gi(17, it);
        int ld = 1 + static_cast<int>(gi.next_u64() % 3);
        int k = 1 + static_cast<int>(gi.next_u64() % 4);
        std::vector<GridFunction> raw;
        for (int i = 0; i < ld; ++i) raw.push_back(random_fn(g, gi));
        auto lb = orthonormalize(raw);
        std::vector<GridFunction> gg;
        for (int i = 0; i < k; ++i) gg.push_back(random_fn(g, gi));
        CHECK(projection_identity_residual(lb, gg) <=
              1e-9 * std::max(1.0, gram_det(gg).value));
    }

    CHECK_THROWS_AS(projection_identity_residual(std::vector<GridFunction>{indicator(g, 0.7)}, gs),
                    std::invalid_argument);
}

TEST_CASE("difference identity examples") {
    Grid g(8);
    // orthonormal pair: 2 = 2 * 1
    auto on = orthonormalize({indicator(g, 0.0, 0.5), indicator(g, 0.5, 1.0)});
    CHECK(difference_identity_residual(on) < 1e-12);
    // half indicators: f = 2 * 1_{[0,1]}, 1 = 4 * (1/4)
    std::vector<GridFunction> halves{indicator(g, 0.0, 0.5), indicator(g, 0.5, 1.0)};
    CHECK(difference_identity_residual(halves) < 1e-12);

    std::vector<GridFunction> dep{halves[0], halves[0] * 3.0};
    CHECK_THROWS_AS(difference_identity_residual(dep), std::invalid_argument);
}

TEST_CASE("perturbation expansion") {
    Grid g(16);
    GridFunction f = indicator(g, 0.0, 0.625);
    // p = 1: det([||g||^2] + eps) = eps + ||g||^2
    CHECK(perturbation_expansion_residual(std::vector<GridFunction>{f}, 0.3) < 1e-12);

    auto on = orthonormalize(
        {indicator(g, 0.0, 0.25), indicator(g, 0.25, 0.5), indicator(g, 0.5, 1.0)});
    for (double eps : {1e-3, 1.0, 10.0})
        CHECK(perturbation_expansion_residual(on, eps) < 1e-9 * std::pow(1 + eps, 3));

    rng::Philox gen(19, 0);
    for (int it = 0; it < 100; ++it) {
        int p = 1 + static_cast<int>(gen.next_u64() % 5);
        std::vector<GridFunction> vs;
        for (int i = 0; i < p; ++i) vs.push_back(random_fn(g, gen));
        double eps = (it % 3 == 0) ? 1e-3 : (it % 3 == 1 ? 1.0 : 10.0);
        CHECK(perturbation_expansion_residual(vs, eps) <= 1e-9 * std::pow(1.0 + eps, p));
    }
}

TEST_CASE("hadamard-type growth bound") {
    Grid g(24);
    for (int it = 0; it < 200; ++it) {
        rng::Philox gen(23, it);
        int k = 1 + static_cast<int>(gen.next_u64() % 5);
        std::vector<GridFunction> vs;
        for (int i = 0; i < k; ++i) vs.push_back(random_fn(g, gen));
        GridFunction v = random_fn(g, gen);
        double base = gram_det(vs).value;
        std::vector<GridFunction> ext = vs;
        ext.push_back(v);
        CHECK(gram_det(ext).value <=
              v.squared_norm() * base * (1 + 1e-9) + 1e-9 * std::max(1.0, base));
    }
}

TEST_CASE("step bound ratio") {
    Grid g(64);
    std::vector<double> jumps{0.25, 0.5};
    auto basis = orthonormalize({indicator(g, 0.25), indicator(g, 0.5)});
    // spanning exactly the indicator span: constant ratio |det C|^2 at k = 0
    double k0 = step_bound_constant(jumps, {}, basis);
    CHECK(k0 > 0.0);
    std::vector<double> ts{0.125, 0.6875, 0.875};
    double r1 = step_bound_constant(jumps, ts, basis);
    CHECK(r1 > 0.0);
    // degenerate sample: a t coinciding with a jump point makes the
    // denominator family dependent
    std::vector<double> bad{0.25};
    CHECK_THROWS_AS(step_bound_constant(jumps, bad, basis), std::runtime_error);
    // basis outside the indicator span violates the precondition
    auto outside = orthonormalize({indicator(g, 0.75)});
    CHECK_THROWS_AS(step_bound_constant(jumps, ts, outside), std::invalid_argument);
}

}  // TEST_SUITE
