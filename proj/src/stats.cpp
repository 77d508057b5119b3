#include "tightline/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "tightline/errors.hpp"

namespace tightline::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double quantile(std::span<const double> x, double p) {
  if (x.empty()) throw ArgumentError("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile level outside [0, 1]");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double jackknife_stderr(std::span<const double> loo) {
  if (loo.size() < 2) return 0.0;
  const double n = static_cast<double>(loo.size());
  const double m = mean(loo);
  double ss = 0.0;
  for (double v : loo) ss += (v - m) * (v - m);
  return std::sqrt((n - 1.0) / n * ss);
}

double integrated_autocorr_time(std::span<const double> series, double c) {
  const std::size_t n = series.size();
  if (n < 4) throw ArgumentError("integrated_autocorr_time: series too short");
  const double m = mean(series);
  double c0 = 0.0;
  for (double v : series) c0 += (v - m) * (v - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 0.5;
  double tau = 0.5;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double ct = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) ct += (series[i] - m) * (series[i + t] - m);
    ct /= static_cast<double>(n);
    tau += ct / c0;
    if (static_cast<double>(t) >= c * tau) break;
  }
  return std::max(tau, 0.5);
}

// ---------------------------------------------------------------- circular

double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double wrap_signed(double theta) {
  double r = wrap_angle(theta);
  return r > kTwoPi / 2 ? r - kTwoPi : r;
}

double circular_distance(double theta) { return std::abs(wrap_signed(theta)); }

double circular_mean(std::span<const double> theta) {
  double s = 0.0, c = 0.0;
  for (double t : theta) {
    s += std::sin(t);
    c += std::cos(t);
  }
  return wrap_angle(std::atan2(s, c));
}

double resultant_length(std::span<const double> theta) {
  if (theta.empty()) throw ArgumentError("resultant_length of empty sample");
  double s = 0.0, c = 0.0;
  for (double t : theta) {
    s += std::sin(t);
    c += std::cos(t);
  }
  return std::hypot(s, c) / static_cast<double>(theta.size());
}

double rayleigh_pvalue(std::span<const double> theta) {
  const double n = static_cast<double>(theta.size());
  const double rn = resultant_length(theta) * n;
  const double p = std::exp(std::sqrt(1.0 + 4.0 * n + 4.0 * (n * n - rn * rn)) - (1.0 + 2.0 * n));
  return std::clamp(p, 0.0, 1.0);
}

double kuiper_pvalue(std::span<const double> theta) {
  if (theta.size() < 2) throw ArgumentError("kuiper_pvalue needs at least two angles");
  std::vector<double> u(theta.size());
  std::transform(theta.begin(), theta.end(), u.begin(), [](double t) { return wrap_angle(t) / kTwoPi; });
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d_plus = 0.0, d_minus = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double k = static_cast<double>(i);
    d_plus = std::max(d_plus, (k + 1.0) / n - u[i]);
    d_minus = std::max(d_minus, u[i] - k / n);
  }
  const double sn = std::sqrt(n);
  const double lam = (d_plus + d_minus) * (sn + 0.155 + 0.24 / sn);
  if (lam < 0.4) return 1.0;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double jl2 = static_cast<double>(j * j) * lam * lam;
    const double term = 2.0 * (4.0 * jl2 - 1.0) * std::exp(-2.0 * jl2);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

double circular_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("circular_correlation: bad sample sizes");
  const double ma = circular_mean(a), mb = circular_mean(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sa = std::sin(a[i] - ma), sb = std::sin(b[i] - mb);
    num += sa * sb;
    da += sa * sa;
    db += sb * sb;
  }
  if (da <= 0.0 || db <= 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

double chi_square_sf(double x, double dof) {
  if (!(dof > 0.0)) throw ArgumentError("chi_square_sf: dof must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

// ---------------------------------------------------------------- fits

LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool with_slope,
                   std::span<const double> sigma) {
  const std::size_t n = x.size();
  const std::size_t k = with_slope ? 2 : 1;
  if (y.size() != n) throw ArgumentError("fit_line: x and y differ in length");
  if (n <= k) throw ArgumentError("fit_line: not enough points");
  const bool weighted = !sigma.empty();
  if (weighted && sigma.size() != n) throw ArgumentError("fit_line: sigma and y differ in length");

  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double w = 1.0;
    if (weighted) {
      if (!(sigma[i] > 0.0)) throw ArgumentError("fit_line: sigma must be positive");
      w = 1.0 / sigma[i];
    }
    A(r, 0) = w;
    if (with_slope) A(r, 1) = w * x[i];
    b(r) = w * y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < static_cast<Eigen::Index>(k)) throw ArgumentError("fit_line: design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(b);

  LinearFit fit;
  fit.n = n;
  fit.n_params = k;
  fit.weighted = weighted;
  fit.intercept = beta(0);
  fit.slope = with_slope ? beta(1) : 0.0;
  fit.chi2 = (b - A * beta).squaredNorm();

  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.rss += r * r;
    tss += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;

  const double dof = static_cast<double>(n - k);
  // known errors: inflate only when the scatter exceeds them
  const double sigma2 = weighted ? std::max(1.0, fit.chi2 / dof) : fit.chi2 / dof;
  const Eigen::MatrixXd cov = (A.transpose() * A).inverse() * sigma2;
  fit.intercept_se = std::sqrt(cov(0, 0));
  if (with_slope) fit.slope_se = std::sqrt(cov(1, 1));

  const double nn = static_cast<double>(n);
  if (weighted) {
    fit.bic = fit.chi2 + static_cast<double>(k) * std::log(nn);
  } else {
    const double floor_rss = 1e-300 + 1e-24 * tss;
    fit.bic = nn * std::log(std::max(fit.rss, floor_rss) / nn) + static_cast<double>(k) * std::log(nn);
  }
  return fit;
}

}  // namespace tightline::stats
