#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "tightline/antiderivative.hpp"
#include "tightline/errors.hpp"
#include "tightline/generators.hpp"

using namespace tightline;

namespace {

// (1/t) int_0^t F(0, s) ds by composite midpoint quadrature
double quad_cesaro(const PointChargeConfiguration& c, double rho, double t, int n) {
  const double h = t / n;
  double s = 0;
  for (int j = 0; j < n; ++j) s += centered_sum(c, 0.0, (j + 0.5) * h, rho);
  return s * h / t;
}

}  // namespace

TEST_CASE("shifted lattice Cesaro limit") {
  const double u = 0.25;
  const auto c = gen_shifted_lattice(16384, u);
  for (double t : {1e3, 1e4}) {
    const double exact = cesaro_partial(c, 1.0, t);
    // quadrature error is O(h) at the jumps; Richardson between n and 2n
    const double q1 = quad_cesaro(c, 1.0, t, 200000), q2 = quad_cesaro(c, 1.0, t, 400000);
    CHECK(std::abs(exact - (2 * q2 - q1)) < 1e-4);
    CHECK(std::abs(exact - (0.5 - u)) < 1e-3);
  }
  const std::vector<double> ladder{2500, 5000, 10000};
  const auto tr = cesaro_field(c, 1.0, ladder);
  CHECK(tr.converged);
  CHECK(std::abs(tr.base_value - (u - 0.5)) < 1e-3);
  CHECK(tr.est_error < tr.tol);
}

TEST_CASE("empty field") {
  const PointChargeConfiguration c({}, {}, {0, 100});
  const std::vector<double> ladder{10, 20, 40};
  CesaroOptions o;
  o.e_const = 0.7;
  const auto tr = cesaro_field(c, 0.0, ladder, o);
  for (const auto& r : tr.ladder) CHECK(r.value == 0.0);
  CHECK(tr.base_value == 0.7);
  CHECK(tr.converged);
}

TEST_CASE("poisson Cesaro does not converge") {
  int unconverged = 0;
  for (int r = 0; r < 20; ++r) {
    SeededRng rng(40, r);
    const auto c = gen_poisson(16384.0, 1.0, rng);
    const std::vector<double> ladder{2500, 5000, 10000};
    unconverged += !cesaro_field(c, 1.0, ladder).converged;
  }
  CHECK(unconverged >= 19);
}

TEST_CASE("Cesaro argument checks") {
  const auto c = gen_shifted_lattice(64, 0.5);
  CHECK_THROWS_AS(cesaro_field(c, 1.0, std::vector<double>{8, 16}), ArgumentError);
  CHECK_THROWS_AS(cesaro_field(c, 1.0, std::vector<double>{8, 16, 128}), ArgumentError);
  CHECK_THROWS_AS(cesaro_field(c, 1.0, std::vector<double>{16, 8, 32}), ArgumentError);
  CHECK(default_t_ladder(1e5).size() == 8);
  CHECK(default_t_ladder(1e5).back() == 8192);
  CHECK(default_t_ladder(100).size() == 3);
}

TEST_CASE("telescoped field") {
  const auto c = gen_shifted_lattice(1024, 0.25);
  CesaroOptions o;
  o.grid = {0.0, 0.5};
  const auto tr = cesaro_field(c, 1.0, default_t_ladder(1024), o);
  CHECK(telescoped_field(tr, c, 0.0) == tr.base_value);
  CHECK(telescoped_field(tr, c, 0.5) == doctest::Approx(tr.base_value - 0.5 + 1.0));
  CHECK(tr.values[0] == tr.base_value);
  // jump of +e across the atom at 0.25, which sits inside (0, 0.25]
  const auto c2 = gen_shifted_lattice(1024, 0.6);
  const auto tr2 = cesaro_field(c2, 1.0, default_t_ladder(1024));
  CHECK(telescoped_field(tr2, c2, 0.5) == doctest::Approx(tr2.base_value - 0.5));
  CHECK(telescoped_field(tr2, c2, 0.6) - telescoped_field(tr2, c2, 0.5999999) == doctest::Approx(1.0 - 1e-7));
}

TEST_CASE("defining identity on the grid") {
  SeededRng rng(41);
  const auto c = gen_jittered_lattice(2048, rng);
  CesaroOptions o;
  for (int j = 0; j < 200; ++j) o.grid.push_back(j * 9.87);
  const auto tr = cesaro_field(c, 1.0, default_t_ladder(2048), o);
  for (std::size_t a = 0; a < o.grid.size(); a += 7)
    for (std::size_t b = a + 1; b < o.grid.size(); b += 13)
      CHECK(std::abs((tr.values[b] - tr.values[a]) - centered_sum(c, o.grid[a], o.grid[b], 1.0)) < 1e-9);
}

TEST_CASE("Cesaro field is covariant under rotation") {
  SeededRng rng(42);
  const auto c = gen_jittered_lattice(16384, rng);
  const auto ladder = default_t_ladder(16384);
  const auto tr = cesaro_field(c, 1.0, ladder);
  for (double x : {0.1, 1.0, std::numbers::pi}) {
    const auto rt = cesaro_field(rotate(c, x), 1.0, ladder);
    CHECK(std::abs(rt.base_value - telescoped_field(tr, c, x)) <= 3 * (tr.est_error + rt.est_error));
  }
}

TEST_CASE("Cesaro and plain average agree on tight input") {
  SeededRng rng(43);
  for (int r = 0; r < 5; ++r) {
    const auto c = gen_jittered_lattice(16384, rng);
    const auto tr = cesaro_field(c, 1.0, default_t_ladder(16384));
    // odd grid size: a step of exactly 1/8 would alias with the lattice
    const double plain = plain_average_base(c, 1.0, 8192.0, 65537);
    CHECK(std::abs(tr.base_value - plain) < 0.03);
    const auto s = gen_shifted_lattice(16384, 0.1 + 0.17 * r);
    CHECK(std::abs(plain_average_base(s, 1.0, 8192.0, 65537) - (0.1 + 0.17 * r - 0.5)) < 1e-3);
  }
}

TEST_CASE("median functional") {
  const int n = 10000;
  std::vector<double> y(n);
  for (int j = 0; j < n; ++j) {
    const double x = 5.0 * (j + 0.5) / n;
    y[j] = x - std::floor(x);
  }
  const double m = median_functional(y);
  // five periods: resolution is one grid step of a single period
  CHECK(std::abs(m - 0.5) <= 5.0 / n + 1e-12);
  for (double shift : {0.3, -7.25, 1e3}) {
    std::vector<double> z(y);
    for (auto& v : z) v += shift;
    CHECK(median_functional(z) == m + shift);
  }
  std::vector<double> bumped(y);
  for (int j = 0; j < n / 1000; ++j) bumped[j + 4000] = 100.0;
  CHECK(std::abs(median_functional(bumped) - m) < 1e-2);
  CHECK_THROWS_AS(median_functional(std::vector<double>(999, 0.0)), ArgumentError);
}

TEST_CASE("alternating chain coboundary") {
  std::vector<int> signs(1000);
  for (std::size_t k = 0; k < signs.size(); ++k) signs[k] = k % 2 == 0 ? 1 : -1;
  const auto c = LatticeChargeConfiguration::from_signs(signs);
  const auto sol = lattice_coboundary(c, 0.0);
  CHECK(sol.residual == 0.0);
  CHECK(sol.spread == 1.0);
  for (double g : sol.g_values) CHECK((g == sol.g_values[0] || g == sol.g_values[1]));
}

TEST_CASE("synthetic coboundary is recovered up to a constant") {
  // q_k = g*_{k+1} - g*_k + rho with g* an i.i.d. bounded multiple of e, so
  // q_k - gamma is a multiple of e when gamma = rho
  for (const auto& [e, rho] : {std::pair{0.5, 0.25}, std::pair{0.7, 0.3}, std::pair{1.0 / 3.0, 0.1}}) {
    SeededRng rng(44);
    const std::size_t n = 100000;
    std::vector<std::int64_t> gs(n + 1), m(n);
    for (auto& v : gs) v = static_cast<std::int64_t>(rng.below(7)) - 3;
    for (std::size_t k = 0; k < n; ++k) m[k] = gs[k + 1] - gs[k];
    const LatticeChargeConfiguration c(m, rho, e);
    for (auto cen : {Centering::median, Centering::mean}) {
      const auto sol = lattice_coboundary(c, rho, cen);
      const double shift = sol.g_values[0] - e * gs[0];
      double dev = 0;
      for (std::size_t j = 0; j <= n; ++j) dev = std::max(dev, std::abs(sol.g_values[j] - e * gs[j] - shift));
      CHECK(dev < 1e-12);
      CHECK(sol.residual < 1e-12);
      CHECK(sol.spread <= 6 * e + 1e-12);
    }
  }
  // dyadic unit and offset: every step is exact
  const LatticeChargeConfiguration d({1, -1, 2, -2, 0, 1}, 0.25, 0.5);
  CHECK(lattice_coboundary(d, 0.25).residual == 0.0);
}

TEST_CASE("random walk coboundary spreads like sqrt(n)") {
  double small = 0, large = 0;
  for (int r = 0; r < 40; ++r) {
    SeededRng rng(45, r);
    small += lattice_coboundary(gen_iid_sign_chain(10000, rng), 0.0).spread;
    large += lattice_coboundary(gen_iid_sign_chain(40000, rng), 0.0).spread;
  }
  const double ratio = large / small;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.5);
}
