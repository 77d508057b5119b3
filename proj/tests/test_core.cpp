#include <cmath>
#include <sstream>

#include "doctest.h"
#include "tightline/config_io.hpp"
#include "tightline/core.hpp"
#include "tightline/errors.hpp"
#include "tightline/generators.hpp"
#include "tightline/rng.hpp"

using namespace tightline;

TEST_CASE("charge in interval, shifted lattice") {
  const auto cfg = gen_shifted_lattice(5, 0.25);
  CHECK(charge_in_interval(cfg, 0.0, 3.5).multiples == 4);
  CHECK(centered_sum(cfg, 0.0, 3.5, 1.0) == doctest::Approx(0.5));
  CHECK(centered_sum(cfg, 0.0, 3.5, 0.0) == 4.0);
  // half-open: atom at b counts, atom at a does not
  CHECK(charge_in_interval(cfg, 0.25, 1.25).multiples == 1);
  CHECK(charge_in_interval(cfg, 0.0, 0.25).multiples == 1);
}

TEST_CASE("charge in interval, alternating lattice") {
  std::vector<int> signs;
  for (int k = 0; k < 10; ++k) signs.push_back(k % 2 == 0 ? 1 : -1);
  const auto cfg = LatticeChargeConfiguration::from_signs(signs);
  const auto q = charge_in_interval(cfg, 0.0, 5.0);
  CHECK(q.sites == 5);
  CHECK(q.value() == -1.0);
  CHECK(centered_sum(cfg, 0.0, 5.0, 0.0) == -1.0);
}

TEST_CASE("interval errors") {
  SeededRng rng(1);
  const auto cfg = gen_poisson(10.0, 1.0, rng);
  CHECK_THROWS_AS(charge_in_interval(cfg, 2.0, 2.0), ArgumentError);
  CHECK_THROWS_AS(charge_in_interval(cfg, -1.0, 2.0), OutOfWindowError);
  CHECK_THROWS_AS(charge_in_interval(cfg, 1.0, 11.0), OutOfWindowError);
  const auto lat = LatticeChargeConfiguration({1, 0, 1}, 0.0, 1.0);
  CHECK_THROWS_AS(charge_in_interval(lat, 0.0, 5.0), OutOfWindowError);
  CHECK_THROWS_AS(PointChargeConfiguration({1.0, 0.5}, {1, 1}, {0, 2}), ArgumentError);
  CHECK_THROWS_AS(PointChargeConfiguration({0.5, 2.0}, {1, 1}, {0, 2}), ArgumentError);
}

TEST_CASE("additivity is exact") {
  SeededRng rng(7);
  const auto cfg = gen_poisson(200.0, 1.3, rng);
  for (int i = 0; i < 500; ++i) {
    double a = rng.uniform(0, 200), b = rng.uniform(0, 200), c = rng.uniform(0, 200);
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    if (!(a < b && b < c)) continue;
    CHECK(charge_in_interval(cfg, a, c).multiples ==
          charge_in_interval(cfg, a, b).multiples + charge_in_interval(cfg, b, c).multiples);
  }
  const auto lat = gen_cluster_chain({4096, 4.0}, rng);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.below(1000), b = a + 1 + rng.below(1000), c = b + 1 + rng.below(2000);
    const auto ac = charge_in_interval(lat, a, c), ab = charge_in_interval(lat, a, b), bc = charge_in_interval(lat, b, c);
    CHECK(ac.multiples == ab.multiples + bc.multiples);
    CHECK(ac.sites == ab.sites + bc.sites);
  }
}

TEST_CASE("rotation equivariance on periodic windows") {
  SeededRng rng(11);
  const auto cfg = gen_jittered_lattice(64, rng);
  for (double x : {0.1, 1.0, 3.14159, 17.5}) {
    const auto r = rotate(cfg, x);
    for (int i = 0; i < 100; ++i) {
      const double a = rng.uniform(0, 40), b = a + rng.uniform(0.01, 20);
      CHECK(charge_in_interval(r, a, b).multiples == charge_in_interval(cfg, a + x, b + x).multiples);
    }
  }
  std::vector<int> signs(50);
  for (auto& s : signs) s = rng.uniform() < 0.5 ? 1 : -1;
  const auto lat = LatticeChargeConfiguration::from_signs(signs, Boundary::periodic);
  const auto rl = rotate(lat, 7);
  for (int a = 0; a < 40; ++a)
    CHECK(charge_in_interval(rl, a, a + 9).multiples == charge_in_interval(lat, a + 7, a + 16).multiples);
}

TEST_CASE("density estimates") {
  std::vector<PointChargeConfiguration> ens;
  SeededRng rng(3);
  for (int r = 0; r < 5; ++r) ens.push_back(gen_shifted_lattice(100, rng));
  const auto d = estimate_density(std::span<const PointChargeConfiguration>(ens));
  CHECK(d.rho == 1.0);
  CHECK(d.rho_stderr == 0.0);

  // +-1 lattice with equal frequencies: rho 0, alpha 1, so lambda = e / alpha = 2
  std::vector<LatticeChargeConfiguration> lat;
  for (int r = 0; r < 20; ++r) lat.push_back(gen_iid_sign_chain(4096, rng));
  const auto dl = estimate_density(std::span<const LatticeChargeConfiguration>(lat));
  CHECK(std::abs(dl.rho) < 4 * dl.rho_stderr + 1e-12);
  CHECK(dl.alpha == doctest::Approx(1.0).epsilon(0.02));
  CHECK(2.0 / dl.alpha == doctest::Approx(2.0).epsilon(0.02));
  CHECK_FALSE(dl.alpha_degenerate);

  CHECK(reduce_alpha(0.0, 1.0, 2.0) == 1.0);
  CHECK(reduce_alpha(1.0, 1.0, 2.0) == 0.0);
  CHECK(reduce_alpha(-0.5, 1.0, 2.0) == 0.5);
  CHECK_THROWS_AS(estimate_density(std::span<const PointChargeConfiguration>{}), ArgumentError);
}

TEST_CASE("poisson centered sum has mean zero") {
  double s = 0, s2 = 0;
  const int n = 10000;
  for (int r = 0; r < n; ++r) {
    SeededRng rng(99, r);
    const double f = centered_sum(gen_poisson(100.0, 1.0, rng), 0.0, 100.0, 1.0);
    s += f;
    s2 += f * f;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean) < 3 * se);
}

TEST_CASE("seeded rng replays") {
  SeededRng a(5, 2), b(5, 2), c(5, 3);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    differs = differs || x != z;
  }
  CHECK(differs);
  CHECK(derive_stream(1, 2) != derive_stream(2, 1));
}

TEST_CASE("configuration text round trip is bit exact") {
  SeededRng rng(21, 4);
  const auto cfg = gen_jittered_lattice(257, rng);
  const auto lat = gen_cluster_chain({512, 4.0}, rng);
  std::stringstream ss;
  write_configuration(ss, cfg);
  write_configuration(ss, lat);
  const auto back = read_configurations(ss);
  REQUIRE(back.size() == 2);
  const auto& p = std::get<PointChargeConfiguration>(back[0]);
  REQUIRE(p.size() == cfg.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p.positions()[i] == cfg.positions()[i]);
    CHECK(p.multiples()[i] == cfg.multiples()[i]);
  }
  CHECK(p.window().hi == cfg.window().hi);
  CHECK(p.periodic());
  CHECK(p.provenance().seed == 21);
  CHECK(p.provenance().stream == 4);
  const auto& l = std::get<LatticeChargeConfiguration>(back[1]);
  REQUIRE(l.size() == lat.size());
  for (std::size_t k = 0; k < l.size(); ++k) CHECK(l.multiples()[k] == lat.multiples()[k]);
  CHECK(l.gamma() == 1.0);
  CHECK(l.unit() == 2.0);

  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0})
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("malformed configuration text") {
  std::stringstream ss("#tightline-configuration\t1\n#kind\tcontinuum\n#window\t0\t1\n#count\t2\n0.5\t1\n");
  CHECK_THROWS_AS(read_configurations(ss), ArgumentError);
}
