#include "gilt/parallel.hpp"
#include "gilt/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

using namespace gilt;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent oracle for the ordered-simplex integral of prod x_i^{-1/2} over
// spacings summing to at most 1: iterated 1-d midpoint quadrature with the
// substitution x = u^2 flattening each inverse-square-root singularity.
double spacing_integral_oracle(int p) {
    const int steps = 400;
    std::function<double(double, int)> rec = [&](double remaining, int level) -> double {
        if (level == p) return 1.0;
        double upper = std::sqrt(remaining);
        double total = 0.0;
        for (int i = 0; i < steps; ++i) {
            double u = (i + 0.5) * upper / steps;
            total += 2.0 * rec(remaining - u * u, level + 1);
        }
        return total * upper / steps;
    };
    return rec(1.0, 0);
}

// Independent oracle for int_0^1 dt / sqrt(t (1-t)): split at 1/2, substitute
// t = u^2 on each half so the integrand is smooth.
double arcsine_integral_oracle() {
    const int steps = 2000;
    double upper = std::sqrt(0.5);
    double total = 0.0;
    for (int i = 0; i < steps; ++i) {
        double u = (i + 0.5) * upper / steps;
        total += 2.0 / std::sqrt(1.0 - u * u);
    }
    return 2.0 * total * upper / steps;
}

}  // namespace

TEST_SUITE("quadrature") {

TEST_CASE("closed forms match the frozen oracle values") {
    // p! / (2^{p/2} Gamma(p/2+1)); cross-checked against |N(0,1)| moments
    CHECK(wiener_moment_closed_form(1) == doctest::Approx(0.7978845608028654).epsilon(1e-12));
    CHECK(wiener_moment_closed_form(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wiener_moment_closed_form(3) == doctest::Approx(1.5957691216057308).epsilon(1e-12));
    CHECK(wiener_moment_closed_form(4) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(wiener_moment_closed_form(5) == doctest::Approx(6.383076486422924).epsilon(1e-12));

    // Rayleigh moments 2^{k/2} Gamma(k/2+1)
    CHECK(bridge_moment_closed_form(1) == doctest::Approx(1.2533141373155003).epsilon(1e-12));
    CHECK(bridge_moment_closed_form(2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(bridge_moment_closed_form(4) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(bridge_moment_closed_form(5) == doctest::Approx(18.79971168443534).epsilon(1e-12));

    CHECK_THROWS_AS(wiener_moment_closed_form(0), std::invalid_argument);
    CHECK_THROWS_AS(bridge_moment_closed_form(0), std::invalid_argument);
}

TEST_CASE("simplex integrals against the independent quadrature oracle") {
    // Wiener case p = 2: oracle integrates prod x_i^{-1/2} over the simplex.
    CHECK(spacing_integral_oracle(2) == doctest::Approx(kPi).epsilon(2e-3));
    // Bridge case p = 1: int dt / sqrt(t (1-t)).
    CHECK(arcsine_integral_oracle() == doctest::Approx(kPi).epsilon(1e-5));
}

TEST_CASE("importance sampling reproduces the elementary integrals") {
    Grid g(512);
    OperatorSpec id = OperatorSpec::identity(g);
    MomentEstimate e1 = simplex_inv_sqrt_gram(id, 1, 20000, 101);
    CHECK(e1.value == doctest::Approx(2.0).epsilon(1e-10));  // int dt/sqrt(t)
    CHECK(e1.weight_variance < 1e-20);

    MomentEstimate e2 = simplex_inv_sqrt_gram(id, 2, 20000, 102);
    CHECK(e2.value == doctest::Approx(kPi).epsilon(1e-10));
    CHECK(e2.weight_variance < 1e-20);

    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    MomentEstimate b1 = simplex_inv_sqrt_gram(br, 1, 200000, 103);
    CHECK(std::abs(b1.value - kPi) <= 4.0 * b1.std_error);
}

TEST_CASE("moment scaling: p!/(2 pi)^{p/2}") {
    Grid g(512);
    OperatorSpec id = OperatorSpec::identity(g);
    MomentEstimate m1 = moment_via_quadrature(id, 1, 10000, 7);
    CHECK(m1.value == doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-10));
    MomentEstimate m2 = moment_via_quadrature(id, 2, 10000, 7);
    CHECK(m2.value == doctest::Approx(1.0).epsilon(1e-10));

    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    MomentEstimate b2 = moment_via_quadrature(br, 2, 200000, 9);
    CHECK(std::abs(b2.value - 2.0) <= 4.0 * b2.std_error);
}

TEST_CASE("estimates are reproducible and thread-count independent") {
    Grid g(128);
    OperatorSpec br = OperatorSpec::complement_projection(g, {constant_function(g, 1.0)});
    MomentEstimate a = simplex_inv_sqrt_gram(br, 3, 30000, 42);
    MomentEstimate b = simplex_inv_sqrt_gram(br, 3, 30000, 42);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);

    int saved = parallel::max_threads();
    parallel::set_max_threads(1);
    MomentEstimate c = simplex_inv_sqrt_gram(br, 3, 30000, 42);
    parallel::set_max_threads(4);
    MomentEstimate d = simplex_inv_sqrt_gram(br, 3, 30000, 42);
    parallel::set_max_threads(saved);
    CHECK(a.value == c.value);
    CHECK(a.value == d.value);
    CHECK(a.std_error == d.std_error);

    MomentEstimate other = simplex_inv_sqrt_gram(br, 3, 30000, 43);
    CHECK(other.value != a.value);
}

TEST_CASE("preconditions") {
    Grid g(64);
    OperatorSpec id = OperatorSpec::identity(g);
    CHECK_THROWS_AS(simplex_inv_sqrt_gram(id, 0, 10000, 1), std::invalid_argument);
    CHECK_THROWS_AS(simplex_inv_sqrt_gram(id, 9, 10000, 1), std::invalid_argument);
    CHECK_THROWS_AS(simplex_inv_sqrt_gram(id, 2, 10, 1), std::invalid_argument);
}

TEST_CASE("y moments: composition over segments") {
    CHECK(y_moment_closed_form({}, 2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(y_moment_closed_form({}, 3) ==
          doctest::Approx(bridge_moment_closed_form(3)).epsilon(1e-12));
    std::vector<double> half{0.5};
    CHECK(y_moment_closed_form(half, 1) == doctest::Approx(std::sqrt(kPi)).epsilon(1e-12));
    CHECK(y_moment_closed_form(half, 2) == doctest::Approx(2.0 + kPi / 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(y_moment_closed_form(std::vector<double>{0.5, 0.25}, 1),
                    std::invalid_argument);
}

TEST_CASE("u-integrated closed form against the independent oracle") {
    CHECK(u_integrated_wiener_closed_form(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u_integrated_wiener_closed_form(2) ==
          doctest::Approx(1.0638460810704868).epsilon(1e-12));
    CHECK(u_integrated_wiener_closed_form(3) == doctest::Approx(1.5).epsilon(1e-12));

    // q = 2: (2/sqrt(2 pi)) * int_{t1<t2} (t2-t1)^{-1/2}; the inner integral is
    // the p = 1 spacing integral with a tail factor removed -> evaluate directly.
    const int steps = 2000;
    double inner_int = 0.0;  // int_0^1 u^{-1/2} (1-u) du via u = v^2
    for (int i = 0; i < steps; ++i) {
        double v = (i + 0.5) / steps;
        inner_int += 2.0 * (1.0 - v * v);
    }
    inner_int /= steps;
    double oracle = 2.0 / std::sqrt(2.0 * kPi) * inner_int;
    CHECK(u_integrated_wiener_closed_form(2) == doctest::Approx(oracle).epsilon(1e-5));
}

}  // TEST_SUITE
