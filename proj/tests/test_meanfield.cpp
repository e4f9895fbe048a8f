#include <array>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/meanfield_sk.hpp"

using namespace tfinfer;

namespace {

MeanFieldParams fig4(double field) {
  MeanFieldParams p;
  p.sigma = 0.5;
  p.gamma = 0.75;
  p.j0 = 1.0;
  p.beta0 = p.beta = 30.0;
  p.field = field;
  return p;
}

MeanFieldSolution solve(const MeanFieldParams& p, const QuadratureSpec& quad = {}) {
  return combine(solve_original(p, quad), solve_noisy(p, quad));
}

double ln2cosh(double x) {
  x = std::abs(x);
  return x + std::log1p(std::exp(-2.0 * x));
}

}  // namespace

TEST_CASE("Gaussian quadrature moments") {
  const auto gh = gauss_hermite_rule(96);
  const auto sl = stretched_legendre_rule(256, -0.3, 0.05);
  for (const auto* rule : {&gh, &sl}) {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
      const double z = rule->nodes[i], w = rule->weights[i];
      m0 += w;
      m1 += w * z;
      m2 += w * z * z;
      m4 += w * z * z * z * z;
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m1) < 1e-12);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-10));
  }
  // A steep integrand centred away from zero.
  const double exact = std::erf(0.3 / std::numbers::sqrt2);
  double acc = 0.0;
  for (std::size_t i = 0; i < sl.nodes.size(); ++i) acc += sl.weights[i] * std::tanh(200.0 * (sl.nodes[i] + 0.3));
  CHECK(acc == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("argument functions") {
  const auto p = fig4(0.4);
  CHECK(psi(0.0, p) == doctest::Approx(p.beta * 0.4));
  auto q = p;
  q.field = 0.0;
  CHECK(psi(-2.5, q) == 2.5);
  CHECK(phi(0.7, -0.2, p, 0.0, 0.0, 0.0) == 0.0);
  const double sd = std::sqrt(0.25 + 0.5625);
  CHECK(phi(0.7, -0.2, p, 0.3, 0.4, 0.5) ==
        doctest::Approx(sd * 30.0 * std::sqrt(0.3) * 0.7 + 30.0 * 0.4 + sd * 30.0 * std::sqrt(0.2) * -0.2));
  CHECK(phi0(0.7, p, 0.3, 0.4) == doctest::Approx(0.5 * 30.0 * std::sqrt(0.3) * 0.7 + 30.0 * 0.4));
}

TEST_CASE("original branch matches an independent RS solver") {
  for (auto [sigma, j0, beta] : {std::array{0.5, 1.0, 30.0}, std::array{0.5, 1.0, 2.0}, std::array{1.0, 0.5, 3.0},
                                 std::array{1.0, 1.2, 10.0}}) {
    MeanFieldParams p;
    p.sigma = sigma;
    p.j0 = j0;
    p.beta0 = beta;
    const auto sol = solve_original(p, {});
    REQUIRE(sol.converged);
    const auto ref = oracle::classical_rs_sk(sigma, j0, beta);
    CHECK(std::abs(sol.m0 - ref.m) < 1e-8);
    CHECK(std::abs(sol.q0 - ref.q) < 1e-8);
  }
}

TEST_CASE("original branch symmetry and pure limit") {
  MeanFieldParams p;
  p.sigma = 0.5;
  p.j0 = 0.0;
  const auto glass = solve_original(p, {});
  CHECK(glass.converged);
  CHECK(glass.m0 == 0.0);
  p.sigma = 1e-6;
  p.j0 = 1.0;
  const auto ferro = solve_original(p, {});
  CHECK(ferro.m0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ferro.q0 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("zero field: r = 1 and the classical RS equations") {
  for (auto [sigma, gamma, beta] : {std::array{0.5, 0.75, 30.0}, std::array{0.0, 0.4, 30.0}, std::array{0.5, 0.4, 5.0},
                                    std::array{0.5, 1.0, 30.0}}) {
    MeanFieldParams p = fig4(0.0);
    p.sigma = sigma;
    p.gamma = gamma;
    p.beta = beta;
    const auto sol = solve_noisy(p, {});
    REQUIRE(sol.converged);
    CHECK(std::abs(sol.r - 1.0) < 1e-9);
    const auto ref = oracle::classical_rs_sk(p.noisy_sd(), p.j0, beta);
    CHECK(std::abs(sol.m - ref.m) < 1e-8);
    CHECK(std::abs(sol.q - ref.q) < 1e-8);
  }
}

TEST_CASE("self-consistency at the documented point") {
  const auto p = fig4(0.5);
  const QuadratureSpec quad;
  const auto sol = solve_noisy(p, quad);
  REQUIRE(sol.converged);
  const auto rhs = noisy_rhs(p, quad, sol.m, sol.q, sol.r);
  CHECK(std::abs(rhs.m - sol.m) < 1e-8);
  CHECK(std::abs(rhs.q - sol.q) < 1e-8);
  CHECK(std::abs(rhs.r - sol.r) < 1e-8);
  CHECK(sol.residual < 1e-8);
  CHECK(0.0 <= sol.q);
  CHECK(sol.q <= sol.r);
  CHECK(sol.r <= 1.0);
}

TEST_CASE("strong field polarizes along x") {
  MeanFieldParams p = fig4(100.0);
  p.beta = 5.0;
  const auto sol = solve_noisy(p, {});
  REQUIRE(sol.converged);
  CHECK(sol.m == 0.0);
  CHECK(sol.q < 1e-8);
  // x-polarized paramagnet: r = tanh(beta field) / (beta field) to leading order
  CHECK(sol.r == doctest::Approx(std::tanh(500.0) / 500.0).epsilon(1e-2));
}

TEST_CASE("free energy is stationary at the solution") {
  for (double field : {0.3, 0.8, 1.6}) {
    MeanFieldParams p = fig4(field);
    p.beta0 = p.beta = 5.0;
    const QuadratureSpec quad;
    const auto s = solve(p, quad);
    REQUIRE(s.converged);
    std::array<double, 5> x{s.m0, s.q0, s.m, s.q, s.r};
    const double h = 1e-5;
    for (int k = 0; k < 5; ++k) {
      auto f = [&](double dx) {
        auto y = x;
        y[static_cast<std::size_t>(k)] += dx;
        return free_energy(p, quad, y[0], y[1], y[2], y[3], y[4]);
      };
      // forward differences where a backward step would leave q >= 0 or r >= q
      const bool edge = (k == 1 && x[1] < h) || (k == 3 && x[3] < h) || (k == 4 && x[4] - x[3] < h);
      const double g = edge ? (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h) : (f(h) - f(-h)) / (2.0 * h);
      CHECK(std::abs(g) < 1e-4);
    }
  }
}

TEST_CASE("free energy matches an independent evaluation") {
  MeanFieldParams p = fig4(0.6);
  p.beta0 = 3.0;
  p.beta = 4.0;
  const QuadratureSpec quad;
  for (auto v : {std::array{0.6, 0.5, 0.4, 0.3, 0.45}, std::array{0.9, 0.85, 0.0, 0.2, 0.5}}) {
    const double f = free_energy(p, quad, v[0], v[1], v[2], v[3], v[4]);
    const double ref = oracle::original_free_energy(p.sigma, p.j0, p.beta0, v[0], v[1]) +
                       oracle::noisy_free_energy(p.noisy_sd(), p.j0, p.beta, p.field, v[2], v[3], v[4]);
    CHECK(f == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("no disorder decouples into pure systems") {
  MeanFieldParams p;
  p.sigma = p.gamma = 0.0;
  p.j0 = 1.0;
  p.beta0 = 3.0;
  p.beta = 2.0;
  p.field = 0.5;
  const QuadratureSpec quad;
  const auto s = solve(p, quad);
  REQUIRE(s.converged);
  CHECK(s.m0 == doctest::Approx(std::tanh(p.beta0 * s.m0)).epsilon(1e-10));
  // quantum Curie-Weiss
  const double rad = std::sqrt(p.field * p.field + s.m * s.m);
  CHECK(s.m == doctest::Approx(s.m / rad * std::tanh(p.beta * rad)).epsilon(1e-10));
  CHECK(s.m > 0.5);
  const double noisy = -p.beta * s.m * s.m / 2.0 + ln2cosh(p.beta * rad);
  const double ref = -p.beta0 * s.m0 * s.m0 / 2.0 + ln2cosh(p.beta0 * s.m0) + noisy;
  CHECK(free_energy(p, quad, s) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("overlap limits") {
  const QuadratureSpec quad;
  MeanFieldParams p = fig4(0.0);
  p.sigma = 1e-3;
  p.gamma = 0.0;
  auto s = solve(p, quad);
  CHECK(overlap_mf(p, quad, s).overlap == doctest::Approx(1.0));

  p = fig4(0.5);
  p.j0 = 0.0;
  s = solve(p, quad);
  REQUIRE(s.converged);
  CHECK(overlap_mf(p, quad, s).overlap == 0.0);

  p = fig4(0.0);
  s = solve(p, quad);
  const auto ov = overlap_mf(p, quad, s);
  CHECK(ov.noisy_factor == doctest::Approx(std::erf(p.j0 * s.m / (p.noisy_sd() * std::sqrt(2.0 * s.q)))).epsilon(1e-9));
  CHECK(ov.original_factor ==
        doctest::Approx(std::erf(p.j0 * s.m0 / (p.sigma * std::sqrt(2.0 * s.q0)))).epsilon(1e-12));
  CHECK(std::erf(ov.noisy_margin) == doctest::Approx(ov.noisy_factor).epsilon(1e-12));

  s.converged = false;
  CHECK_THROWS_AS(overlap_mf(p, quad, s), ConvergenceError);
}

TEST_CASE("original branch ignores noise parameters") {
  auto a = fig4(0.2);
  auto b = fig4(1.7);
  b.gamma = 0.1;
  b.beta = 12.0;
  const auto sa = solve_original(a, {});
  const auto sb = solve_original(b, {});
  CHECK(sa.m0 == sb.m0);
  CHECK(sa.q0 == sb.q0);
}

TEST_CASE("quadrature convergence at moderate beta") {
  MeanFieldParams p = fig4(0.8);
  p.beta0 = p.beta = 5.0;
  QuadratureSpec coarse;
  QuadratureSpec fine;
  fine.n_nodes_outer *= 2;
  fine.n_nodes_inner *= 2;
  const auto a = solve(p, coarse);
  const auto b = solve(p, fine);
  CHECK(std::abs(overlap_mf(p, coarse, a).overlap - overlap_mf(p, fine, b).overlap) < 1e-6);
}

TEST_CASE("large-beta stability above the glassy region") {
  const QuadratureSpec quad;
  for (double field : {1.5, 1.8}) {
    MeanFieldParams p = fig4(field);
    const double m30 = overlap_mf(p, quad, solve(p, quad)).overlap;
    p.beta0 = p.beta = 50.0;
    const double m50 = overlap_mf(p, quad, solve(p, quad)).overlap;
    CHECK(std::abs(m30 - m50) < 1e-3);
  }
}

TEST_CASE("sweeps and gamma_opt") {
  const QuadratureSpec quad;
  const auto fields = grid_range(0.0, 1.0, 0.1);
  MeanFieldParams p = fig4(0.0);
  p.sigma = 0.0;
  p.gamma = 0.0;
  const auto rows = find_gamma_opt_mf(p, std::vector<double>{0.0}, fields, quad);
  CHECK(rows[0].failed == 0);
  CHECK(rows[0].opt.field == 0.0);

  // a row with no magnetized point has no optimum
  p = fig4(0.0);
  p.sigma = 0.0;
  p.gamma = 1.0;
  const auto glass = find_gamma_opt_mf(p, std::vector<double>{1.0}, grid_range(0.2, 1.0, 0.2), quad);
  CHECK(std::isnan(glass[0].opt.field));
  CHECK(glass[0].opt.max_overlap == 0.0);

  p = fig4(0.0);
  const auto sweep = sweep_field_mf(p, grid_range(1.3, 2.0, 0.1), quad);
  CHECK(sweep.failed == 0);
  for (std::size_t i = 1; i < sweep.points.size(); ++i) {
    CHECK(sweep.points[i].solution.m <= sweep.points[i - 1].solution.m + 1e-12);
    CHECK(sweep.points[i].solution.q <= sweep.points[i - 1].solution.q + 1e-12);
  }
}

TEST_CASE("parameter validation") {
  MeanFieldParams p = fig4(0.5);
  p.beta = 0.0;
  CHECK_THROWS_AS(solve_noisy(p, {}), Error);
  p = fig4(-0.1);
  CHECK_THROWS_AS(solve_noisy(p, {}), Error);
  QuadratureSpec q;
  q.n_nodes_outer = 100;
  CHECK_THROWS_AS(q.validate(), Error);
}
