#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tightline::stats {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

double mean(std::span<const double> x);
/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
double variance(std::span<const double> x);

/// Linear-interpolation quantile (type 7), p in [0, 1]. Copies and sorts.
double quantile(std::span<const double> x, double p);

/// Standard error from leave-one-out estimates theta_(i):
/// sqrt((n-1)/n * sum (theta_(i) - mean)^2).
double jackknife_stderr(std::span<const double> leave_one_out);

/// Sokal's windowed integrated autocorrelation time, tau = 1/2 + sum rho(t),
/// summing until the window W >= c * tau(W).
double integrated_autocorr_time(std::span<const double> series, double c = 5.0);

// ---------------------------------------------------------------- circular

/// Reduce an angle into [0, 2 pi).
double wrap_angle(double theta);
/// Reduce an angle into (-pi, pi].
double wrap_signed(double theta);
/// |theta| folded onto [0, pi].
double circular_distance(double theta);

double circular_mean(std::span<const double> theta);
/// Mean resultant length R-bar in [0, 1].
double resultant_length(std::span<const double> theta);

/// Rayleigh test of uniformity (Zar's approximation to the exact p-value).
double rayleigh_pvalue(std::span<const double> theta);
/// Kuiper test against Uniform[0, 2 pi), Stephens' finite-n correction.
double kuiper_pvalue(std::span<const double> theta);
/// Jammalamadaka-Sarma circular correlation coefficient.
double circular_correlation(std::span<const double> a, std::span<const double> b);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

// ---------------------------------------------------------------- fits

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_se = 0.0;
  double slope_se = 0.0;
  double rss = 0.0;   // unweighted residual sum of squares
  double chi2 = 0.0;  // weighted; equals rss when unweighted
  double r_squared = 0.0;
  double bic = 0.0;
  std::size_t n = 0;
  std::size_t n_params = 0;
  bool weighted = false;
};

/// Least squares y ~ a (+ b x when with_slope). Unweighted: BIC is
/// n ln(RSS/n) + k ln n, with a floor on RSS so exact fits stay finite.
/// With per-point sigma: weighted fit, BIC = chi2 + k ln n, and the parameter
/// errors are inflated by sqrt(chi2/dof) when that exceeds 1.
LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool with_slope = true,
                   std::span<const double> sigma = {});

}  // namespace tightline::stats
