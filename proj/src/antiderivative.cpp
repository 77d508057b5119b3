#include "tightline/antiderivative.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tightline/errors.hpp"
#include "tightline/stats.hpp"

namespace tightline {

namespace {

void check_t(double t, double window) {
  if (!(t > 0.0)) throw ArgumentError("Cesaro: t must be positive");
  if (t > window) throw ArgumentError("Cesaro: t = " + std::to_string(t) + " exceeds the window");
}

void check_ladder(std::span<const double> ladder, double window) {
  if (ladder.size() < 3) throw ArgumentError("cesaro_field: t ladder needs at least 3 rungs");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    check_t(ladder[i], window);
    if (i > 0 && !(ladder[i - 1] < ladder[i])) throw ArgumentError("cesaro_field: t ladder must increase");
  }
}

template <class Cfg>
AntiderivativeTrace build_trace(const Cfg& cfg, double rho, std::span<const double> ladder, const CesaroOptions& opt,
                                double window) {
  check_ladder(ladder, window);
  if (!std::isfinite(rho)) throw ArgumentError("cesaro_field: rho must be finite");
  AntiderivativeTrace tr;
  tr.rho = rho;
  tr.unit = cfg.unit();
  tr.e_const = opt.e_const;
  tr.tol = opt.tol >= 0.0 ? opt.tol : 1e-3 * cfg.unit();
  for (double t : ladder) tr.ladder.push_back({t, cesaro_partial(cfg, rho, t)});
  const std::size_t n = tr.ladder.size();
  tr.base_value = opt.e_const - tr.ladder.back().value;
  const double top = std::abs(tr.ladder[n - 1].value - tr.ladder[n - 2].value);
  tr.est_error = std::max(top, std::abs(tr.ladder[n - 2].value - tr.ladder[n - 3].value));
  tr.converged = top < tr.tol;
  return tr;
}

}  // namespace

double cesaro_partial(const PointChargeConfiguration& cfg, double rho, double t) {
  check_t(t, cfg.window().length());
  const double origin = cfg.window().lo;
  const auto x = cfg.positions();
  const auto m = cfg.multiples();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = x[i] - origin;
    if (s <= 0.0) continue;
    if (s > t) break;
    sum += static_cast<double>(m[i]) * (1.0 - s / t);
  }
  return cfg.unit() * sum - 0.5 * rho * t;
}

double cesaro_partial(const LatticeChargeConfiguration& cfg, double rho, double t) {
  const auto n = static_cast<std::int64_t>(cfg.size());
  check_t(t, static_cast<double>(n));
  const auto top = static_cast<std::int64_t>(std::floor(t));
  const auto m = cfg.multiples();
  double sum_m = 0.0, sum_w = 0.0;
  for (std::int64_t k = 1; k <= top; ++k) {
    const double w = 1.0 - static_cast<double>(k) / t;
    const auto idx = static_cast<std::size_t>(k < n ? k : k - n);
    if (k >= n && !cfg.periodic()) break;
    sum_w += w;
    sum_m += static_cast<double>(m[idx]) * w;
  }
  return cfg.gamma() * sum_w + cfg.unit() * sum_m - 0.5 * rho * t;
}

std::vector<double> default_t_ladder(double window) {
  if (!(window > 0.0)) throw ArgumentError("default_t_ladder: window must be positive");
  std::vector<double> out;
  for (int k = 6; k <= 13; ++k) {
    const double t = std::ldexp(1.0, k);
    if (t <= window) out.push_back(t);
  }
  if (out.size() < 3) out = {window / 4.0, window / 2.0, window};
  return out;
}

AntiderivativeTrace cesaro_field(const PointChargeConfiguration& cfg, double rho, std::span<const double> ladder,
                                 const CesaroOptions& opt) {
  auto tr = build_trace(cfg, rho, ladder, opt, cfg.window().length());
  tr.origin = cfg.window().lo;
  for (double x : opt.grid) {
    tr.grid.push_back(x);
    tr.values.push_back(telescoped_field(tr, cfg, x));
  }
  return tr;
}

AntiderivativeTrace cesaro_field(const LatticeChargeConfiguration& cfg, double rho, std::span<const double> ladder,
                                 const CesaroOptions& opt) {
  auto tr = build_trace(cfg, rho, ladder, opt, static_cast<double>(cfg.size()));
  tr.lattice = true;
  tr.origin = 0.0;
  for (double x : opt.grid) {
    tr.grid.push_back(x);
    tr.values.push_back(telescoped_field(tr, cfg, x));
  }
  return tr;
}

double telescoped_field(const AntiderivativeTrace& tr, const PointChargeConfiguration& cfg, double x) {
  if (x == tr.origin) return tr.base_value;
  if (x > tr.origin) return tr.base_value + centered_sum(cfg, tr.origin, x, tr.rho);
  return tr.base_value - centered_sum(cfg, x, tr.origin, tr.rho);
}

double telescoped_field(const AntiderivativeTrace& tr, const LatticeChargeConfiguration& cfg, double x) {
  if (x == tr.origin) return tr.base_value;
  if (x > tr.origin) return tr.base_value + centered_sum(cfg, tr.origin, x, tr.rho);
  return tr.base_value - centered_sum(cfg, x, tr.origin, tr.rho);
}

namespace {

double order_statistic_median(std::vector<double> v) {
  const std::size_t k = (v.size() + 1) / 2 - 1;  // ceil(n/2), 0-based
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

std::vector<double> grid_samples(const PointChargeConfiguration& cfg, double rho, double length, std::size_t n) {
  if (n == 0) throw ArgumentError("grid needs at least one point");
  if (!(length > 0.0) || length > cfg.window().length())
    throw ArgumentError("grid length must be positive and fit in the window");
  const double lo = cfg.window().lo;
  std::vector<double> y(n);
  const double h = length / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = (static_cast<double>(j) + 0.5) * h;
    y[j] = centered_sum(cfg, lo, lo + s, rho);
  }
  return y;
}

}  // namespace

double median_functional(std::span<const double> samples) {
  if (samples.size() < 1000) throw ArgumentError("median_functional: needs at least 1000 grid samples");
  return order_statistic_median(std::vector<double>(samples.begin(), samples.end()));
}

double plain_average_base(const PointChargeConfiguration& cfg, double rho, double length, std::size_t n_grid,
                          double e_const) {
  const auto y = grid_samples(cfg, rho, length, n_grid);
  return e_const - stats::mean(y);
}

double median_centered_base(const PointChargeConfiguration& cfg, double rho, double length, std::size_t n_grid,
                            double e_const) {
  return e_const - median_functional(grid_samples(cfg, rho, length, n_grid));
}

CoboundarySolution lattice_coboundary(const LatticeChargeConfiguration& cfg, double rho, Centering centering) {
  if (!std::isfinite(rho)) throw ArgumentError("lattice_coboundary: rho must be finite");
  const std::size_t n = cfg.size();
  const double drift = cfg.gamma() - rho;
  const double e = cfg.unit();
  const auto m = cfg.multiples();

  std::vector<double> p(n + 1);
  std::int64_t k_sum = 0;
  p[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    k_sum += m[j - 1];
    p[j] = std::fma(static_cast<double>(j), drift, e * static_cast<double>(k_sum));
  }
  const double centre = centering == Centering::median ? order_statistic_median(p) : stats::mean(p);

  CoboundarySolution sol;
  sol.centering = centering;
  sol.g_values.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) sol.g_values[j] = p[j] - centre;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = cfg.charge(k) - rho;
    sol.residual = std::max(sol.residual, std::abs(f - (sol.g_values[k + 1] - sol.g_values[k])));
  }
  sol.spread = stats::quantile(sol.g_values, 0.975) - stats::quantile(sol.g_values, 0.025);
  return sol;
}

}  // namespace tightline
