#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "tightline/rng.hpp"
#include "tightline/stats.hpp"

using namespace tightline;
using namespace tightline::stats;

TEST_CASE("moments and quantiles") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(mean(x) == 3.0);
  CHECK(variance(x) == 2.5);
  CHECK(quantile(x, 0.0) == 1.0);
  CHECK(quantile(x, 1.0) == 5.0);
  CHECK(quantile(x, 0.5) == 3.0);
  CHECK(quantile(x, 0.9) == doctest::Approx(4.6));
  CHECK(variance(std::vector<double>{7.0}) == 0.0);
}

TEST_CASE("jackknife of the mean is the usual standard error") {
  SeededRng rng(1);
  std::vector<double> x(50);
  for (auto& v : x) v = rng.normal();
  const double m = mean(x);
  std::vector<double> loo;
  for (double v : x) loo.push_back((m * 50 - v) / 49);
  CHECK(jackknife_stderr(loo) == doctest::Approx(std::sqrt(variance(x) / 50)));
}

TEST_CASE("autocorrelation time of an AR(1) series") {
  SeededRng rng(2);
  const double a = 0.8;
  std::vector<double> x(200000);
  double v = 0;
  for (auto& s : x) s = v = a * v + rng.normal();
  // tau = (1 + a) / (2 (1 - a)) = 4.5
  CHECK(integrated_autocorr_time(x) == doctest::Approx(4.5).epsilon(0.1));
}

TEST_CASE("angles") {
  CHECK(wrap_angle(-0.5) == doctest::Approx(kTwoPi - 0.5));
  CHECK(wrap_angle(kTwoPi) == 0.0);
  CHECK(wrap_signed(1.5 * std::numbers::pi) == doctest::Approx(-0.5 * std::numbers::pi));
  CHECK(circular_distance(kTwoPi - 0.1) == doctest::Approx(0.1));
  CHECK(circular_distance(-3.0) == doctest::Approx(3.0));
  const std::vector<double> t{0.1, kTwoPi - 0.1};
  CHECK(std::abs(wrap_signed(circular_mean(t))) < 1e-12);
  CHECK(resultant_length(t) == doctest::Approx(std::cos(0.1)));
}

TEST_CASE("uniformity tests") {
  SeededRng rng(3);
  std::vector<double> u(500), vm(500);
  for (auto& v : u) v = rng.uniform() * kTwoPi;
  for (auto& v : vm) v = wrap_angle(0.4 * rng.normal());
  CHECK(rayleigh_pvalue(u) > 0.01);
  CHECK(kuiper_pvalue(u) > 0.01);
  CHECK(rayleigh_pvalue(vm) < 1e-6);
  CHECK(kuiper_pvalue(vm) < 1e-6);
  std::vector<double> b(500);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = wrap_angle(u[i] + 0.3 * rng.normal());
  CHECK(circular_correlation(u, u) == doctest::Approx(1.0));
  CHECK(circular_correlation(u, b) > 0.5);
}

TEST_CASE("chi-square tail") {
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(chi_square_sf(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(chi_square_sf(0.0, 3) == 1.0);
}

TEST_CASE("line fits") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 + 0.5 * v);
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(0.5));
  CHECK(f.intercept == doctest::Approx(2.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(std::isfinite(f.bic));
  const auto c = fit_line(x, y, false);
  CHECK(c.intercept == doctest::Approx(mean(y)));
  CHECK(c.n_params == 1);

  // weights: a wild point with a huge sigma barely moves the fit
  std::vector<double> yw(y), sw(6, 0.1);
  yw[5] += 10.0;
  sw[5] = 1e4;
  const auto w = fit_line(x, yw, true, sw);
  CHECK(w.weighted);
  CHECK(w.slope == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(w.chi2 >= 0.0);
  CHECK(w.bic == doctest::Approx(w.chi2 + 2 * std::log(6.0)));
}
