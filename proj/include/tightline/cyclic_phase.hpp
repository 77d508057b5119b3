#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tightline/antiderivative.hpp"
#include "tightline/core.hpp"
#include "tightline/fluctuations.hpp"

namespace tightline {

/// phi = 2 pi E0 / e reduced into [0, 2 pi). Throws HypothesesNotMet when the
/// trace did not converge.
double extract_phase(const AntiderivativeTrace& trace, double unit);

enum class PeriodMode { continuum, lattice };

struct PeriodEstimate {
  double lambda = 0.0;
  double stderr = 0.0;
};

/// lambda = e / rho (continuum) or e / alpha (lattice). Throws HypothesesNotMet
/// when rho (or alpha mod e) is within 3 stderr of zero.
PeriodEstimate predicted_period(const DensitySummary& density, double unit, PeriodMode mode);

/// How phases are computed inside the covariance and decomposition checks.
struct PhaseSettings {
  std::vector<double> t_ladder;  // empty: default_t_ladder(window)
  double e_const = 0.0;
  double tol = -1.0;  // negative: 1e-3 * e
};

/// Phase of one configuration, or nullopt when its Cesaro trace did not converge.
std::optional<double> phase_of(const PointChargeConfiguration& cfg, double rho, const PhaseSettings& s);
std::optional<double> phase_of(const LatticeChargeConfiguration& cfg, double rho, const PhaseSettings& s);

struct CovarianceResult {
  std::vector<double> shifts;
  std::vector<double> residuals;  // folded to [0, pi], one per usable (replica, shift)
  double residual_q95 = 0.0;      // NaN when no pair was usable
  std::size_t n_pairs = 0;
  std::size_t n_excluded = 0;
  double excluded_fraction = 0.0;
  bool inconclusive = false;  // more than 20% of pairs excluded
  /// Period recovered from the measured phase shifts (slope of the unwrapped
  /// shift against x), with a replica jackknife error.
  double lambda_measured = 0.0;
  double lambda_stderr = 0.0;
};

/// For each replica and shift x, |phi(T_x w) - phi(w) + 2 pi x / lambda|
/// folded to [0, pi]. T_x is the exact rotation of a periodic window; an open
/// window is restricted to [lo + x, hi). An empty t ladder in `s` becomes
/// default_t_ladder of the (restricted) window, shared by both phases.
CovarianceResult covariance_test(std::span<const PointChargeConfiguration> ens, double rho, double lambda,
                                 std::span<const double> shifts, const PhaseSettings& s = {});
CovarianceResult covariance_test(std::span<const LatticeChargeConfiguration> ens, double rho, double lambda,
                                 std::span<const std::int64_t> shifts, const PhaseSettings& s = {});

struct UniformityResult {
  double kuiper_p = 1.0;
  double rayleigh_p = 1.0;
  std::size_t n = 0;
};

/// Kuiper and Rayleigh tests against Uniform[0, 2 pi). Needs >= 100 phases.
UniformityResult uniformity_test(std::span<const double> phases);

struct RationalApprox {
  bool found = false;
  std::int64_t p = 0;
  std::int64_t q = 1;
};

/// Smallest-denominator p/q (q <= max_den) within `tolerance` of x.
RationalApprox detect_rational(double x, double tolerance, std::int64_t max_den = 64);

/// Equal-occupancy chi-square test of the q sectors [2 pi r/q, 2 pi (r+1)/q):
/// a measure invariant under rotation by 2 pi p/q (gcd(p, q) = 1) gives them
/// equal mass. Returns the p-value.
double cycle_test(std::span<const double> phases, std::int64_t q);

// ---------------------------------------------------------------- components

struct ComponentProfile {
  double lambda = 0.0;
  std::size_t n_bins = 0, n_u_bins = 0;
  std::vector<std::size_t> counts;              // configurations per theta bin
  std::vector<std::vector<double>> density;     // [theta bin][u bin], charge per unit length / e
  std::vector<std::vector<double>> stderr;
  std::vector<double> pooled, pooled_stderr;
  double flat = 0.0;              // mean charge density / e
  double flatness_pvalue = 1.0;   // chi-square of pooled against flat
  /// Peak-to-trough of the first harmonic aligned with the phase:
  /// 4 <(1/L) sum_i m_i cos(2 pi x_i / lambda - phi - pi)>, per bin and pooled.
  /// A lattice at offset v has phi = 2 pi (v/lambda - 1/2), so its atoms sit
  /// where the cosine peaks.
  std::vector<double> contrast, contrast_stderr;
  double pooled_contrast = 0.0, pooled_contrast_stderr = 0.0;
  /// Raw histogram max - min per bin.
  std::vector<double> raw_peak_to_trough;
  double cycling_discrepancy = -1.0;  // sup |diff| / stderr; negative when not computed
  std::size_t n_configs = 0;
  bool inconclusive = false;
  std::string note;
};

/// Streaming accumulator for the cyclic-component profiles. Configurations
/// arrive with their phase; consecutive configurations are grouped into
/// blocks of `block` for the contrast standard error (batch means), which
/// keeps the error honest for correlated streams.
class ComponentAccumulator {
 public:
  ComponentAccumulator(double lambda, std::size_t n_bins, std::size_t n_u_bins = 16, std::size_t block = 1);

  void add(const PointChargeConfiguration& cfg, double phi);
  ComponentProfile finish() const;
  std::size_t size() const noexcept { return n_; }

 private:
  double lambda_;
  std::size_t bins_, ubins_, block_;
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
  std::vector<double> sum_, sum2_;  // [bin * ubins + u]
  double charge_ = 0.0, length_ = 0.0;
  // aligned harmonic, per configuration amplitude a_c
  std::vector<double> bin_a_, bin_a2_;
  std::vector<double> block_means_;
  double block_acc_ = 0.0;
  std::size_t block_fill_ = 0;
};

using PhaseFn = std::function<std::optional<double>(const PointChargeConfiguration&)>;

/// Bins configurations by phase and histograms their atoms mod lambda. When a
/// phase function is given, also rotates every configuration by lambda/n_bins,
/// recomputes its phase and reports the sup-norm mismatch (in stderr units)
/// between the rotated profiles and the cycled originals. Empty bins make the
/// routine retry with half as many bins (not below 4), then mark the result
/// inconclusive.
ComponentProfile decompose_components(std::span<const PointChargeConfiguration> ens, std::span<const double> phases,
                                      double lambda, std::size_t n_bins, std::size_t n_u_bins = 16,
                                      const PhaseFn& phase_fn = {}, std::size_t block = 1);

// ---------------------------------------------------------------- mixing

struct MixingOptions {
  std::size_t n_offsets = 1021;  // prime, so the offset grid never matches lambda
  bool bias_correct = true;
  /// Pair replica r with replica r+1 (independence control).
  bool cross_replica = false;
};

struct MixingCurve {
  std::vector<double> lags;  // realised lags on the offset grid
  std::vector<std::complex<double>> value;
  std::vector<double> magnitude;
  std::vector<double> stderr;
  double probe_scale = 0.0;
  std::size_t n_replicas = 0;
};

/// Local Cesaro phase probe g(a) = exp(-2 pi i I_s(a) / e), I_s(a) the
/// Cesaro mean of F(a, a+u) over u in [0, s], centered by each replica's
/// spatial mean; reports <conj(g(a)) g(a + lag)> with a replica standard error.
MixingCurve mixing_correlator(std::span<const PointChargeConfiguration> ens, double rho, double probe_scale,
                              std::span<const double> lags, MixingOptions opt = {});

enum class MixingBehaviour { decaying, non_decaying, undetermined };
/// non_decaying when every lag >= min_lag has |C| > 5 stderr; decaying when
/// every such lag has |C| < 3 stderr.
MixingBehaviour classify_mixing(const MixingCurve& curve, double min_lag = 8.0);
const char* to_string(MixingBehaviour b);

// ---------------------------------------------------------------- verdict

enum class Verdict { cyclic_factor_detected, no_cyclic_factor, hypotheses_not_met, inconclusive };
const char* to_string(Verdict v);

struct VerdictInputs {
  const TightnessVerdict* tightness = nullptr;
  DensitySummary density;
  const CovarianceResult* covariance = nullptr;
  const MixingCurve* mixing = nullptr;
  double residual_tol = 0.2;
};

struct VerdictResult {
  Verdict verdict = Verdict::inconclusive;
  std::string reason;
};

/// cyclic_factor_detected only when the ensemble is tight, the rho (alpha)
/// hypothesis holds, and the covariance law is met within residual_tol with
/// at most 20% exclusions.
VerdictResult assemble_verdict(const VerdictInputs& in);

}  // namespace tightline
