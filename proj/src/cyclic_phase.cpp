#include "tightline/cyclic_phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tightline/errors.hpp"
#include "tightline/stats.hpp"

namespace tightline {

using stats::kTwoPi;

double extract_phase(const AntiderivativeTrace& trace, double unit) {
  if (!(unit > 0.0)) throw ArgumentError("extract_phase: unit must be positive");
  if (!trace.converged)
    throw HypothesesNotMet("extract_phase: Cesaro trace not converged (est_error " +
                           std::to_string(trace.est_error) + ")");
  const double r = trace.base_value / unit;
  double phi = kTwoPi * (r - std::floor(r));
  if (phi >= kTwoPi) phi = 0.0;
  return phi;
}

PeriodEstimate predicted_period(const DensitySummary& d, double unit, PeriodMode mode) {
  if (!(unit > 0.0)) throw ArgumentError("predicted_period: unit must be positive");
  PeriodEstimate out;
  if (mode == PeriodMode::continuum) {
    if (d.rho == 0.0 || std::abs(d.rho) <= 3.0 * d.rho_stderr)
      throw HypothesesNotMet("predicted_period: rho is zero within 3 stderr");
    out.lambda = unit / d.rho;
    out.stderr = unit * d.rho_stderr / (d.rho * d.rho);
  } else {
    const double alpha = reduce_alpha(d.rho, d.gamma, unit);
    const double dist = std::min(alpha, unit - alpha);
    if (alpha == 0.0 || dist <= 3.0 * d.rho_stderr)
      throw HypothesesNotMet("predicted_period: alpha = 0 (mod e) within 3 stderr");
    out.lambda = unit / alpha;
    out.stderr = unit * d.rho_stderr / (alpha * alpha);
  }
  return out;
}

namespace {

template <class Cfg>
std::optional<double> phase_impl(const Cfg& cfg, double rho, const PhaseSettings& s, double window) {
  const std::vector<double> ladder = s.t_ladder.empty() ? default_t_ladder(window) : s.t_ladder;
  CesaroOptions opt;
  opt.e_const = s.e_const;
  opt.tol = s.tol;
  const auto tr = cesaro_field(cfg, rho, ladder, opt);
  if (!tr.converged) return std::nullopt;
  return extract_phase(tr, cfg.unit());
}

// T_x: rotation on periodic windows, restriction to [lo + x, hi) on open ones.
PointChargeConfiguration translate(const PointChargeConfiguration& cfg, double x) {
  if (cfg.periodic()) return rotate(cfg, x);
  if (!(x >= 0.0) || !(x < cfg.window().length())) throw ArgumentError("translate: shift outside open window");
  const Window w{cfg.window().lo + x, cfg.window().hi};
  std::vector<double> pos;
  std::vector<std::int64_t> m;
  for (std::size_t i = 0; i < cfg.size(); ++i)
    if (cfg.positions()[i] >= w.lo) {
      pos.push_back(cfg.positions()[i]);
      m.push_back(cfg.multiples()[i]);
    }
  return PointChargeConfiguration(std::move(pos), std::move(m), w, cfg.unit(), cfg.boundary(), cfg.provenance());
}

LatticeChargeConfiguration translate(const LatticeChargeConfiguration& cfg, std::int64_t x) {
  if (cfg.periodic()) return rotate(cfg, x);
  if (x < 0 || x >= static_cast<std::int64_t>(cfg.size())) throw ArgumentError("translate: shift outside lattice");
  std::vector<std::int64_t> m(cfg.multiples().begin() + x, cfg.multiples().end());
  return LatticeChargeConfiguration(std::move(m), cfg.gamma(), cfg.unit(), cfg.boundary(), cfg.provenance());
}

template <class Cfg, class Shift>
CovarianceResult covariance_impl(std::span<const Cfg> ens, double rho, double lambda, std::span<const Shift> shifts,
                                 const PhaseSettings& s, auto window_of) {
  if (ens.empty()) throw ArgumentError("covariance_test: empty ensemble");
  if (shifts.empty()) throw ArgumentError("covariance_test: no shifts");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("covariance_test: lambda must be positive");

  CovarianceResult out;
  double max_shift = 0.0;
  for (auto x : shifts) {
    out.shifts.push_back(static_cast<double>(x));
    max_shift = std::max(max_shift, static_cast<double>(x));
  }
  // one ladder for phi(w) and phi(T_x w); on open windows it has to fit the
  // restricted window
  PhaseSettings common = s;
  if (common.t_ladder.empty()) {
    double w = window_of(ens.front());
    for (const auto& cfg : ens) w = std::min(w, window_of(cfg));
    common.t_ladder = default_t_ladder(ens.front().periodic() ? w : w - max_shift);
  }
  std::vector<double> slopes;
  for (const auto& cfg : ens) {
    const auto phi0 = phase_impl(cfg, rho, common, window_of(cfg));
    double sxd = 0.0, sxx = 0.0;
    for (auto x : shifts) {
      ++out.n_pairs;
      if (!phi0) {
        ++out.n_excluded;
        continue;
      }
      const auto moved = translate(cfg, x);
      const auto phix = phase_impl(moved, rho, common, window_of(moved));
      if (!phix) {
        ++out.n_excluded;
        continue;
      }
      const double xd = static_cast<double>(x);
      const double expect = kTwoPi * xd / lambda;
      out.residuals.push_back(stats::circular_distance(*phix - *phi0 + expect));
      const double d = stats::wrap_signed(*phi0 - *phix);
      const double dunw = d + kTwoPi * std::round((expect - d) / kTwoPi);
      sxd += xd * dunw;
      sxx += xd * xd;
    }
    if (sxx > 0.0) slopes.push_back(sxd / sxx);
  }
  out.excluded_fraction = static_cast<double>(out.n_excluded) / static_cast<double>(out.n_pairs);
  out.inconclusive = out.excluded_fraction > 0.2;
  out.residual_q95 = std::numeric_limits<double>::quiet_NaN();
  out.lambda_measured = std::numeric_limits<double>::quiet_NaN();
  out.lambda_stderr = std::numeric_limits<double>::quiet_NaN();
  if (!out.residuals.empty()) out.residual_q95 = stats::quantile(out.residuals, 0.95);
  if (!slopes.empty()) {
    const double total = std::accumulate(slopes.begin(), slopes.end(), 0.0);
    const double n = static_cast<double>(slopes.size());
    out.lambda_measured = kTwoPi / (total / n);
    if (slopes.size() > 1) {
      std::vector<double> loo;
      for (double sl : slopes) loo.push_back(kTwoPi / ((total - sl) / (n - 1.0)));
      out.lambda_stderr = stats::jackknife_stderr(loo);
    }
  }
  return out;
}

}  // namespace

std::optional<double> phase_of(const PointChargeConfiguration& cfg, double rho, const PhaseSettings& s) {
  return phase_impl(cfg, rho, s, cfg.window().length());
}

std::optional<double> phase_of(const LatticeChargeConfiguration& cfg, double rho, const PhaseSettings& s) {
  return phase_impl(cfg, rho, s, static_cast<double>(cfg.size()));
}

CovarianceResult covariance_test(std::span<const PointChargeConfiguration> ens, double rho, double lambda,
                                 std::span<const double> shifts, const PhaseSettings& s) {
  return covariance_impl(ens, rho, lambda, shifts, s,
                         [](const PointChargeConfiguration& c) { return c.window().length(); });
}

CovarianceResult covariance_test(std::span<const LatticeChargeConfiguration> ens, double rho, double lambda,
                                 std::span<const std::int64_t> shifts, const PhaseSettings& s) {
  return covariance_impl(ens, rho, lambda, shifts, s,
                         [](const LatticeChargeConfiguration& c) { return static_cast<double>(c.size()); });
}

UniformityResult uniformity_test(std::span<const double> phases) {
  if (phases.size() < 100)
    throw InsufficientDataError("uniformity_test: needs at least 100 phases, got " + std::to_string(phases.size()));
  UniformityResult r;
  r.n = phases.size();
  r.kuiper_p = stats::kuiper_pvalue(phases);
  r.rayleigh_p = stats::rayleigh_pvalue(phases);
  return r;
}

RationalApprox detect_rational(double x, double tolerance, std::int64_t max_den) {
  if (max_den < 1) throw ArgumentError("detect_rational: max_den must be positive");
  const double tol = std::max(tolerance, 1e-12);
  for (std::int64_t q = 1; q <= max_den; ++q) {
    const double p = std::round(x * static_cast<double>(q));
    if (std::abs(p / static_cast<double>(q) - x) <= tol)
      return {true, static_cast<std::int64_t>(p), q};
  }
  return {};
}

double cycle_test(std::span<const double> phases, std::int64_t q) {
  if (q <= 1) return 1.0;
  if (phases.empty()) throw ArgumentError("cycle_test: no phases");
  std::vector<double> counts(static_cast<std::size_t>(q), 0.0);
  for (double phi : phases) {
    auto r = static_cast<std::int64_t>(std::floor(stats::wrap_angle(phi) / kTwoPi * static_cast<double>(q)));
    counts[static_cast<std::size_t>(std::clamp<std::int64_t>(r, 0, q - 1))] += 1.0;
  }
  const double expect = static_cast<double>(phases.size()) / static_cast<double>(q);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  return stats::chi_square_sf(chi2, static_cast<double>(q - 1));
}

// ---------------------------------------------------------------- components

ComponentAccumulator::ComponentAccumulator(double lambda, std::size_t n_bins, std::size_t n_u_bins, std::size_t block)
    : lambda_(lambda), bins_(n_bins), ubins_(n_u_bins), block_(block) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("ComponentAccumulator: lambda must be positive");
  if (n_bins < 4) throw ArgumentError("ComponentAccumulator: need at least 4 phase bins");
  if (n_u_bins < 2) throw ArgumentError("ComponentAccumulator: need at least 2 profile bins");
  if (block == 0) throw ArgumentError("ComponentAccumulator: block must be positive");
  counts_.assign(bins_, 0);
  sum_.assign(bins_ * ubins_, 0.0);
  sum2_.assign(bins_ * ubins_, 0.0);
  bin_a_.assign(bins_, 0.0);
  bin_a2_.assign(bins_, 0.0);
}

void ComponentAccumulator::add(const PointChargeConfiguration& cfg, double phi) {
  const double L = cfg.window().length();
  const double lo = cfg.window().lo;
  const double th = stats::wrap_angle(phi);
  const auto b = std::min(static_cast<std::size_t>(th / kTwoPi * static_cast<double>(bins_)), bins_ - 1);
  std::vector<double> h(ubins_, 0.0);
  double amp = 0.0, q = 0.0;
  const double k = kTwoPi / lambda_;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    const double s = cfg.positions()[i] - lo;
    const double m = static_cast<double>(cfg.multiples()[i]);
    const double u = s - lambda_ * std::floor(s / lambda_);
    const auto j = std::min(static_cast<std::size_t>(u / lambda_ * static_cast<double>(ubins_)), ubins_ - 1);
    h[j] += m;
    amp += m * std::cos(k * s - th - std::numbers::pi);
    q += m;
  }
  amp /= L;
  const double scale = static_cast<double>(ubins_) / L;  // charge per bin -> density
  for (std::size_t j = 0; j < ubins_; ++j) {
    const double v = h[j] * scale;
    sum_[b * ubins_ + j] += v;
    sum2_[b * ubins_ + j] += v * v;
  }
  ++counts_[b];
  bin_a_[b] += amp;
  bin_a2_[b] += amp * amp;
  charge_ += q * cfg.unit();
  length_ += L * cfg.unit();
  ++n_;
  block_acc_ += amp;
  if (++block_fill_ == block_) {
    block_means_.push_back(block_acc_ / static_cast<double>(block_));
    block_acc_ = 0.0;
    block_fill_ = 0;
  }
}

ComponentProfile ComponentAccumulator::finish() const {
  ComponentProfile p;
  p.lambda = lambda_;
  p.n_bins = bins_;
  p.n_u_bins = ubins_;
  p.counts = counts_;
  p.n_configs = n_;
  p.flat = length_ > 0.0 ? charge_ / length_ : 0.0;
  p.density.assign(bins_, std::vector<double>(ubins_, 0.0));
  p.stderr.assign(bins_, std::vector<double>(ubins_, 0.0));
  p.contrast.assign(bins_, 0.0);
  p.contrast_stderr.assign(bins_, 0.0);
  p.raw_peak_to_trough.assign(bins_, 0.0);
  for (std::size_t b = 0; b < bins_; ++b) {
    const double n = static_cast<double>(counts_[b]);
    if (counts_[b] == 0) {
      p.inconclusive = true;
      p.note = "empty phase bin";
      continue;
    }
    for (std::size_t j = 0; j < ubins_; ++j) {
      const double m = sum_[b * ubins_ + j] / n;
      const double var = n > 1.0 ? std::max(0.0, (sum2_[b * ubins_ + j] - n * m * m) / (n - 1.0)) : 0.0;
      p.density[b][j] = m;
      p.stderr[b][j] = std::sqrt(var / n);
    }
    const double am = bin_a_[b] / n;
    const double av = n > 1.0 ? std::max(0.0, (bin_a2_[b] - n * am * am) / (n - 1.0)) : 0.0;
    p.contrast[b] = 4.0 * am;
    p.contrast_stderr[b] = 4.0 * std::sqrt(av / n);
    const auto [mn, mx] = std::minmax_element(p.density[b].begin(), p.density[b].end());
    p.raw_peak_to_trough[b] = *mx - *mn;
  }
  p.pooled.assign(ubins_, 0.0);
  p.pooled_stderr.assign(ubins_, 0.0);
  std::size_t used = 0;
  for (std::size_t b = 0; b < bins_; ++b) {
    if (counts_[b] == 0) continue;
    ++used;
    for (std::size_t j = 0; j < ubins_; ++j) {
      p.pooled[j] += p.density[b][j];
      p.pooled_stderr[j] += p.stderr[b][j] * p.stderr[b][j];
    }
  }
  if (used > 0) {
    double chi2 = 0.0;
    std::size_t dof = 0;
    for (std::size_t j = 0; j < ubins_; ++j) {
      p.pooled[j] /= static_cast<double>(used);
      p.pooled_stderr[j] = std::sqrt(p.pooled_stderr[j]) / static_cast<double>(used);
      if (p.pooled_stderr[j] > 0.0) {
        const double z = (p.pooled[j] - p.flat) / p.pooled_stderr[j];
        chi2 += z * z;
        ++dof;
      }
    }
    p.flatness_pvalue = dof > 1 ? stats::chi_square_sf(chi2, static_cast<double>(dof - 1)) : 1.0;
  }
  if (!block_means_.empty()) {
    p.pooled_contrast = 4.0 * stats::mean(block_means_);
    p.pooled_contrast_stderr = 4.0 * std::sqrt(stats::variance(block_means_) / static_cast<double>(block_means_.size()));
  }
  return p;
}

ComponentProfile decompose_components(std::span<const PointChargeConfiguration> ens, std::span<const double> phases,
                                      double lambda, std::size_t n_bins, std::size_t n_u_bins, const PhaseFn& phase_fn,
                                      std::size_t block) {
  if (ens.size() != phases.size()) throw ArgumentError("decompose_components: one phase per configuration required");
  if (n_bins < 4) throw ArgumentError("decompose_components: n_bins must be at least 4");
  std::size_t nb = n_bins;
  ComponentProfile prof;
  while (true) {
    ComponentAccumulator acc(lambda, nb, n_u_bins, block);
    for (std::size_t i = 0; i < ens.size(); ++i)
      if (std::isfinite(phases[i])) acc.add(ens[i], phases[i]);
    prof = acc.finish();
    if (!prof.inconclusive || nb / 2 < 4) break;
    nb /= 2;
  }
  if (prof.inconclusive) {
    prof.note = "empty phase bin even at " + std::to_string(nb) + " bins";
    return prof;
  }
  if (nb != n_bins) prof.note = "reduced to " + std::to_string(nb) + " phase bins";
  if (!phase_fn) return prof;
  if (n_u_bins % nb != 0) {
    prof.note += (prof.note.empty() ? "" : "; ") + std::string("cycling check skipped (u bins not a multiple of phase bins)");
    return prof;
  }
  const double x = lambda / static_cast<double>(nb);
  ComponentAccumulator moved(lambda, nb, n_u_bins, block);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (!std::isfinite(phases[i])) continue;
    const auto r = translate(ens[i], x);
    if (auto phi = phase_fn(r)) moved.add(r, *phi);
  }
  const auto rp = moved.finish();
  const std::size_t shift = n_u_bins / nb;
  double worst = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t b2 = (b + nb - 1) % nb;
    if (prof.counts[b] < 2 || rp.counts[b2] < 2) continue;
    for (std::size_t j = 0; j < n_u_bins; ++j) {
      const std::size_t j2 = (j + n_u_bins - shift) % n_u_bins;
      const double se = std::hypot(prof.stderr[b][j], rp.stderr[b2][j2]);
      const double diff = std::abs(prof.density[b][j] - rp.density[b2][j2]);
      if (se > 0.0) worst = std::max(worst, diff / se);
      else if (diff > 1e-12) worst = std::max(worst, std::numeric_limits<double>::infinity());
    }
  }
  prof.cycling_discrepancy = worst;
  return prof;
}

// ---------------------------------------------------------------- mixing

namespace {

struct ProbeGrid {
  std::vector<std::complex<double>> g;
  double spacing = 0.0;
  bool periodic = false;
};

ProbeGrid probe(const PointChargeConfiguration& cfg, double rho, double s, std::size_t n_off) {
  const double L = cfg.window().length();
  const double lo = cfg.window().lo;
  if (!(s > 0.0) || s >= L) throw ArgumentError("mixing_correlator: probe scale must lie in (0, window)");
  ProbeGrid out;
  out.periodic = cfg.periodic();
  out.spacing = cfg.periodic() ? L / static_cast<double>(n_off) : (L - s) / static_cast<double>(n_off - 1);
  const auto x = cfg.positions();
  const auto m = cfg.multiples();
  const std::size_t n = x.size();
  // doubled atom list for wrap-around windows
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ms(m.begin(), m.end());
  if (cfg.periodic()) {
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(x[i] + L);
      ms.push_back(static_cast<double>(m[i]));
    }
  }
  out.g.resize(n_off);
  std::size_t first = 0;
  for (std::size_t j = 0; j < n_off; ++j) {
    const double a = lo + static_cast<double>(j) * out.spacing;
    while (first < xs.size() && xs[first] <= a) ++first;
    double sum = 0.0;
    for (std::size_t i = first; i < xs.size() && xs[i] <= a + s; ++i) sum += ms[i] * (1.0 - (xs[i] - a) / s);
    const double I = cfg.unit() * sum - 0.5 * rho * s;
    out.g[j] = std::polar(1.0, -kTwoPi * I / cfg.unit());
  }
  std::complex<double> mean{0.0, 0.0};
  for (const auto& v : out.g) mean += v;
  mean /= static_cast<double>(n_off);
  for (auto& v : out.g) v -= mean;
  return out;
}

std::complex<double> lagged(const ProbeGrid& a, const ProbeGrid& b, std::size_t sh) {
  const std::size_t n = a.g.size();
  std::complex<double> acc{0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t k = j + sh;
    if (k >= n) {
      if (!a.periodic) break;
      k -= n;
    }
    acc += std::conj(a.g[j]) * b.g[k];
    ++count;
  }
  return count > 0 ? acc / static_cast<double>(count) : acc;
}

}  // namespace

MixingCurve mixing_correlator(std::span<const PointChargeConfiguration> ens, double rho, double probe_scale,
                              std::span<const double> lags, MixingOptions opt) {
  if (ens.size() < 2) throw ArgumentError("mixing_correlator: needs at least two replicas");
  if (lags.empty()) throw ArgumentError("mixing_correlator: no lags");
  if (opt.n_offsets < 16) throw ArgumentError("mixing_correlator: too few offsets");
  std::vector<ProbeGrid> grids;
  grids.reserve(ens.size());
  for (const auto& c : ens) grids.push_back(probe(c, rho, probe_scale, opt.n_offsets));

  MixingCurve out;
  out.probe_scale = probe_scale;
  out.n_replicas = ens.size();
  const double h = grids.front().spacing;
  const std::size_t n = opt.n_offsets;
  const auto w = static_cast<std::size_t>(std::lround(2.0 * probe_scale / h));
  for (double lag : lags) {
    if (!(lag >= 0.0)) throw ArgumentError("mixing_correlator: lags must be non-negative");
    const auto sh = static_cast<std::size_t>(std::lround(lag / h));
    if (sh >= n) throw ArgumentError("mixing_correlator: lag beyond the offset grid");
    std::vector<std::complex<double>> per;
    for (std::size_t r = 0; r < grids.size(); ++r) {
      const auto& a = grids[r];
      if (opt.cross_replica) {
        per.push_back(lagged(a, grids[(r + 1) % grids.size()], sh));
        continue;
      }
      std::complex<double> c = lagged(a, a, sh);
      if (opt.bias_correct && a.periodic && n > 2 * w + 1) {
        std::complex<double> k = lagged(a, a, 0);
        for (std::size_t y = 1; y <= w; ++y) k += 2.0 * std::real(lagged(a, a, y));
        c += k / static_cast<double>(n - 2 * w - 1);
      }
      per.push_back(c);
    }
    std::complex<double> mean{0.0, 0.0};
    for (const auto& v : per) mean += v;
    mean /= static_cast<double>(per.size());
    double vr = 0.0, vi = 0.0;
    for (const auto& v : per) {
      vr += (v.real() - mean.real()) * (v.real() - mean.real());
      vi += (v.imag() - mean.imag()) * (v.imag() - mean.imag());
    }
    const double rn = static_cast<double>(per.size());
    out.lags.push_back(static_cast<double>(sh) * h);
    out.value.push_back(mean);
    out.magnitude.push_back(std::abs(mean));
    out.stderr.push_back(std::sqrt((vr + vi) / (rn - 1.0) / rn));
  }
  return out;
}

MixingBehaviour classify_mixing(const MixingCurve& curve, double min_lag) {
  bool any = false, all_big = true, all_small = true;
  for (std::size_t i = 0; i < curve.lags.size(); ++i) {
    if (curve.lags[i] < min_lag - 1e-9) continue;
    any = true;
    const double z = curve.stderr[i] > 0.0 ? curve.magnitude[i] / curve.stderr[i] : 0.0;
    if (!(z > 5.0)) all_big = false;
    if (!(z < 3.0)) all_small = false;
  }
  if (!any) return MixingBehaviour::undetermined;
  if (all_big) return MixingBehaviour::non_decaying;
  if (all_small) return MixingBehaviour::decaying;
  return MixingBehaviour::undetermined;
}

const char* to_string(MixingBehaviour b) {
  switch (b) {
    case MixingBehaviour::decaying: return "decaying";
    case MixingBehaviour::non_decaying: return "non_decaying";
    case MixingBehaviour::undetermined: return "undetermined";
  }
  return "?";
}

// ---------------------------------------------------------------- verdict

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::cyclic_factor_detected: return "cyclic_factor_detected";
    case Verdict::no_cyclic_factor: return "no_cyclic_factor";
    case Verdict::hypotheses_not_met: return "hypotheses_not_met";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

VerdictResult assemble_verdict(const VerdictInputs& in) {
  if (!in.tightness) return {Verdict::inconclusive, "tightness not assessed"};
  if (in.tightness->status == Tightness::inconclusive) return {Verdict::inconclusive, "tightness inconclusive"};
  if (in.tightness->status == Tightness::not_tight) return {Verdict::hypotheses_not_met, "not tight"};

  const auto& d = in.density;
  bool degenerate;
  std::string why;
  if (d.lattice) {
    const double alpha = reduce_alpha(d.rho, d.gamma, d.unit);
    degenerate = alpha == 0.0 || std::min(alpha, d.unit - alpha) <= 3.0 * d.rho_stderr;
    why = "\xce\xb1=0 mod e";
  } else {
    degenerate = d.rho == 0.0 || std::abs(d.rho) <= 3.0 * d.rho_stderr;
    why = "\xcf\x81=0";
  }
  if (degenerate) {
    if (in.mixing && classify_mixing(*in.mixing) == MixingBehaviour::non_decaying)
      return {Verdict::inconclusive, why + " but correlator does not decay"};
    return {Verdict::no_cyclic_factor, why};
  }
  if (!in.covariance) return {Verdict::inconclusive, "covariance not tested"};
  if (in.covariance->inconclusive) return {Verdict::inconclusive, "more than 20% of phases unconverged"};
  if (in.covariance->residual_q95 < in.residual_tol) return {Verdict::cyclic_factor_detected, ""};
  char buf[96];
  std::snprintf(buf, sizeof buf, "covariance residual q95 %.3g rad above %.3g", in.covariance->residual_q95,
                in.residual_tol);
  return {Verdict::inconclusive, buf};
}

}  // namespace tightline
