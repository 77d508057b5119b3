#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tightline/core.hpp"
#include "tightline/stats.hpp"

namespace tightline {

enum class WindowEstimator {
  pooled,   // many overlapping offsets per replica (wrapping on periodic windows)
  disjoint  // non-overlapping tiles of the window
};

struct VarianceOptions {
  WindowEstimator estimator = WindowEstimator::pooled;
  /// Offsets per replica for the pooled estimator.
  std::size_t windows_per_replica = 64;
};

struct FluctuationCurve {
  std::vector<double> lengths;
  std::vector<double> mean_F;
  std::vector<double> var_F;
  std::vector<double> q95_absF;
  std::vector<double> stderr_mean;
  std::vector<double> stderr_var;
  std::vector<std::size_t> n_windows;  // pooled samples per replica at each length
  std::size_t n_replicas = 0;
  std::string estimator;  // "pooled" or "disjoint"
  std::string stderr_method;  // "replica-jackknife" or "block-jackknife"
};

/// Statistics of F(a, a+L) pooled over replicas and offsets a. Pooled offsets
/// follow the Kronecker sequence frac(1/2 + j g), g the golden ratio
/// conjugate, so they never line up with a lattice period. Standard errors are
/// leave-one-replica-out jackknife; with fewer than 8 replicas the windows of
/// each replica are split into 16 contiguous blocks instead.
FluctuationCurve variance_growth(std::span<const PointChargeConfiguration> ensemble,
                                 std::span<const double> lengths, double rho, VarianceOptions opt = {});
FluctuationCurve variance_growth(std::span<const LatticeChargeConfiguration> ensemble,
                                 std::span<const double> lengths, double rho, VarianceOptions opt = {});

/// {first, 2 first, 4 first, ...} up to window / 4. per_octave > 1 inserts
/// log-spaced rungs in between; integer rounds them and drops duplicates.
std::vector<double> geometric_ladder(double window, double first = 1.0, int per_octave = 1, bool integer = false);

enum class GrowthModel { bounded, log, linear };
enum class Tightness { tight, not_tight, inconclusive };

const char* to_string(GrowthModel m);
const char* to_string(Tightness t);

struct GrowthOptions {
  /// Fits use lengths >= knee; 0 picks max(length) / 8, keeping at least 4 points.
  double knee = 0.0;
  /// Slopes closer to 0 than this many standard errors count as flat.
  double z_flat = 2.0;
};

struct TightnessVerdict {
  Tightness status = Tightness::inconclusive;
  bool is_tight = false;
  GrowthModel model = GrowthModel::bounded;  // model preferred by BIC
  double sup_q95 = 0.0;
  double knee = 0.0;
  stats::LinearFit constant_fit, log_fit, linear_fit;
  /// Slope standard errors including the propagated per-point errors.
  double log_slope_se = 0.0, linear_slope_se = 0.0;
  double q95_log_slope = 0.0, q95_log_slope_se = 0.0;
  std::string note;
};

/// Fits var_F against a, a + b ln L and a + b L above the knee (weighted by
/// the per-length stderr when all are positive) and picks one
/// by BIC. Tight needs BIC to prefer the constant, both slopes within z_flat
/// standard errors of 0, and no significant rise of q95 |F| against ln L. A
/// log or linear pick with a significantly positive slope is not tight;
/// anything else is inconclusive.
TightnessVerdict classify_growth(const FluctuationCurve& curve, GrowthOptions opt = {});

struct CorrelationSummary {
  std::vector<double> c;  // c(0..max_lag)
  std::vector<double> c_stderr;
  double S0 = 0.0, S0_stderr = 0.0;  // c(0) + 2 sum_{n=1}^{max_lag} c(n)
  double S1 = 0.0, S1_stderr = 0.0;  // sum_{n=1}^{max_lag} n |c(n)|
  std::size_t max_lag = 0;
  std::string stderr_method;
};

/// Centered two-point function of the site charges, pooled over the ensemble.
CorrelationSummary correlation_sum(std::span<const LatticeChargeConfiguration> ensemble, std::size_t max_lag);

}  // namespace tightline
