#include "tightline/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tightline/errors.hpp"

namespace tightline {

namespace {

constexpr double kGolden = 0.6180339887498948482;
constexpr std::size_t kMinSamples = 30;
constexpr std::size_t kMinReplicaGroups = 8;
constexpr std::size_t kBlocksPerReplica = 16;

double kronecker(std::size_t j) {
  const double v = 0.5 + static_cast<double>(j) * kGolden;
  return v - std::floor(v);
}

void check_lengths(std::span<const double> lengths, double window, bool integer) {
  if (lengths.empty()) throw ArgumentError("variance_growth: no lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double l = lengths[i];
    if (!(l > 0.0)) throw ArgumentError("variance_growth: lengths must be positive");
    if (!(l < window)) throw ArgumentError("variance_growth: length " + std::to_string(l) + " not below window");
    if (i > 0 && !(lengths[i - 1] < l)) throw ArgumentError("variance_growth: lengths must increase");
    if (integer && l != std::floor(l)) throw ArgumentError("variance_growth: lattice lengths must be integers");
  }
}

struct GroupSums {
  double n = 0.0, s = 0.0, q = 0.0;
};

// plug-in variance: pooled windows are quasi-random, not iid, so no n-1 correction
double var_of(double n, double s, double q) { return n > 0.0 ? (q - s * s / n) / n : 0.0; }

// Collects the samples of one length and reduces them to the curve entries.
// `offsets(cfg_index)` returns the list of a values for that replica.
template <class Cfg, class Offsets>
void fill_length(FluctuationCurve& curve, std::span<const Cfg> ens, double len, double rho, Offsets offsets) {
  const bool by_replica = ens.size() >= kMinReplicaGroups;
  std::vector<GroupSums> groups;
  std::vector<double> abs_f;
  std::size_t windows = 0;
  for (std::size_t r = 0; r < ens.size(); ++r) {
    const std::vector<double> as = offsets(r);
    windows = std::max(windows, as.size());
    const std::size_t base = groups.size();
    groups.resize(base + (by_replica ? 1 : kBlocksPerReplica));
    for (std::size_t j = 0; j < as.size(); ++j) {
      const double f = centered_sum(ens[r], as[j], as[j] + len, rho);
      auto& g = groups[base + (by_replica ? 0 : j * kBlocksPerReplica / as.size())];
      g.n += 1.0;
      g.s += f;
      g.q += f * f;
      abs_f.push_back(std::abs(f));
    }
  }
  if (abs_f.size() < kMinSamples)
    throw InsufficientDataError("variance_growth: only " + std::to_string(abs_f.size()) +
                                " pooled samples at length " + std::to_string(len));
  GroupSums tot;
  for (const auto& g : groups) {
    tot.n += g.n;
    tot.s += g.s;
    tot.q += g.q;
  }
  std::vector<double> loo_var, loo_mean;
  for (const auto& g : groups) {
    if (g.n == 0.0) continue;
    const double n = tot.n - g.n, s = tot.s - g.s, q = tot.q - g.q;
    loo_var.push_back(var_of(n, s, q));
    loo_mean.push_back(n > 0.0 ? s / n : 0.0);
  }
  curve.lengths.push_back(len);
  curve.mean_F.push_back(tot.s / tot.n);
  curve.var_F.push_back(std::max(0.0, var_of(tot.n, tot.s, tot.q)));
  curve.q95_absF.push_back(stats::quantile(abs_f, 0.95));
  curve.stderr_mean.push_back(stats::jackknife_stderr(loo_mean));
  curve.stderr_var.push_back(stats::jackknife_stderr(loo_var));
  curve.n_windows.push_back(windows);
  curve.stderr_method = by_replica ? "replica-jackknife" : "block-jackknife";
}

FluctuationCurve empty_curve(std::size_t replicas, const VarianceOptions& opt) {
  if (replicas == 0) throw ArgumentError("variance_growth: empty ensemble");
  if (opt.estimator == WindowEstimator::pooled && opt.windows_per_replica == 0)
    throw ArgumentError("variance_growth: windows_per_replica must be positive");
  FluctuationCurve c;
  c.n_replicas = replicas;
  c.estimator = opt.estimator == WindowEstimator::pooled ? "pooled" : "disjoint";
  return c;
}

}  // namespace

FluctuationCurve variance_growth(std::span<const PointChargeConfiguration> ens, std::span<const double> lengths,
                                 double rho, VarianceOptions opt) {
  FluctuationCurve curve = empty_curve(ens.size(), opt);
  double window = ens.front().window().length();
  for (const auto& c : ens) window = std::min(window, c.window().length());
  check_lengths(lengths, window, false);
  for (double len : lengths) {
    fill_length(curve, ens, len, rho, [&](std::size_t r) {
      const auto& cfg = ens[r];
      const Window w = cfg.window();
      std::vector<double> as;
      if (opt.estimator == WindowEstimator::disjoint) {
        const auto tiles = static_cast<std::size_t>(std::floor(w.length() / len));
        for (std::size_t k = 0; k < tiles; ++k) {
          const double a = w.lo + static_cast<double>(k) * len;
          if (a + len <= w.hi) as.push_back(a);
        }
      } else {
        const double span = cfg.periodic() ? w.length() : w.length() - len;
        for (std::size_t j = 0; j < opt.windows_per_replica; ++j) as.push_back(w.lo + span * kronecker(j));
      }
      return as;
    });
  }
  return curve;
}

FluctuationCurve variance_growth(std::span<const LatticeChargeConfiguration> ens, std::span<const double> lengths,
                                 double rho, VarianceOptions opt) {
  FluctuationCurve curve = empty_curve(ens.size(), opt);
  std::size_t sites = ens.front().size();
  for (const auto& c : ens) sites = std::min(sites, c.size());
  check_lengths(lengths, static_cast<double>(sites), true);
  for (double len : lengths) {
    const auto l = static_cast<std::int64_t>(len);
    fill_length(curve, ens, len, rho, [&](std::size_t r) {
      const auto& cfg = ens[r];
      const auto n = static_cast<std::int64_t>(cfg.size());
      std::vector<double> as;
      if (opt.estimator == WindowEstimator::disjoint) {
        for (std::int64_t k = 0; (k + 1) * l <= n; ++k) as.push_back(static_cast<double>(-1 + k * l));
      } else {
        const std::int64_t count = cfg.periodic() ? n : n - l + 1;
        for (std::size_t j = 0; j < opt.windows_per_replica; ++j) {
          const auto a = static_cast<std::int64_t>(std::floor(static_cast<double>(count) * kronecker(j)));
          as.push_back(static_cast<double>(std::min(a, count - 1) - (cfg.periodic() ? 0 : 1)));
        }
      }
      return as;
    });
  }
  return curve;
}

std::vector<double> geometric_ladder(double window, double first, int per_octave, bool integer) {
  if (!(first > 0.0) || !(window > 0.0)) throw ArgumentError("geometric_ladder: arguments must be positive");
  if (per_octave < 1) throw ArgumentError("geometric_ladder: per_octave must be >= 1");
  const double top = window / 4.0 * (1.0 + 1e-12);
  std::vector<double> out;
  for (int k = 0;; ++k) {
    double l = first * std::exp2(static_cast<double>(k) / per_octave);
    if (integer) l = std::round(l);
    if (l > top) break;
    if (integer && l < 1.0) continue;
    if (out.empty() || l > out.back()) out.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------- classification

const char* to_string(GrowthModel m) {
  switch (m) {
    case GrowthModel::bounded: return "bounded";
    case GrowthModel::log: return "log";
    case GrowthModel::linear: return "linear";
  }
  return "?";
}

const char* to_string(Tightness t) {
  switch (t) {
    case Tightness::tight: return "tight";
    case Tightness::not_tight: return "not_tight";
    case Tightness::inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

// Standard error of an OLS slope including the per-point errors of y.
bool flat(double slope, double se, double z) { return std::abs(slope) <= z * se + 1e-12; }
bool rising(double slope, double se, double z) { return slope > z * se + 1e-12; }

}  // namespace

TightnessVerdict classify_growth(const FluctuationCurve& curve, GrowthOptions opt) {
  const std::size_t n = curve.lengths.size();
  if (n < 6) throw ArgumentError("classify_growth: needs at least 6 lengths");
  if (curve.lengths.back() < 10.0 * curve.lengths.front() * (1.0 - 1e-12))
    throw ArgumentError("classify_growth: lengths must span at least one decade");

  TightnessVerdict v;
  v.sup_q95 = *std::max_element(curve.q95_absF.begin(), curve.q95_absF.end());
  v.knee = opt.knee > 0.0 ? opt.knee : curve.lengths.back() / 8.0;
  std::size_t first = 0;
  while (first < n && curve.lengths[first] < v.knee * (1.0 - 1e-12)) ++first;
  if (n - first < 4) first = n - 4;
  v.knee = curve.lengths[first];

  std::vector<double> L, lnL, var, se, q95;
  for (std::size_t i = first; i < n; ++i) {
    L.push_back(curve.lengths[i]);
    lnL.push_back(std::log(curve.lengths[i]));
    var.push_back(curve.var_F[i]);
    se.push_back(curve.stderr_var[i]);
    q95.push_back(curve.q95_absF[i]);
  }

  // weight by the per-length errors when every one is usable
  const bool weighted = std::all_of(se.begin(), se.end(), [](double s) { return s > 0.0; });
  const std::span<const double> sigma = weighted ? std::span<const double>(se) : std::span<const double>();
  try {
    v.constant_fit = stats::fit_line(L, var, false, sigma);
    v.log_fit = stats::fit_line(lnL, var, true, sigma);
    v.linear_fit = stats::fit_line(L, var, true, sigma);
    const auto qfit = stats::fit_line(lnL, q95, true);
    v.q95_log_slope = qfit.slope;
    v.q95_log_slope_se = qfit.slope_se;
  } catch (const ArgumentError& e) {
    v.status = Tightness::inconclusive;
    v.note = std::string("ill-conditioned fit: ") + e.what();
    return v;
  }
  v.log_slope_se = v.log_fit.slope_se;
  v.linear_slope_se = v.linear_fit.slope_se;

  const double scale = std::max(1.0, std::abs(v.constant_fit.intercept));
  if (v.constant_fit.rss <= 1e-24 * scale * scale * static_cast<double>(L.size())) {
    v.model = GrowthModel::bounded;
    v.status = Tightness::tight;
    v.is_tight = true;
    v.note = "variance constant to rounding";
    return v;
  }

  v.model = GrowthModel::bounded;
  double best = v.constant_fit.bic;
  if (v.log_fit.bic < best) {
    best = v.log_fit.bic;
    v.model = GrowthModel::log;
  }
  if (v.linear_fit.bic < best) v.model = GrowthModel::linear;

  const bool log_flat = flat(v.log_fit.slope, v.log_slope_se, opt.z_flat);
  const bool lin_flat = flat(v.linear_fit.slope, v.linear_slope_se, opt.z_flat);
  const bool q95_up = rising(v.q95_log_slope, v.q95_log_slope_se, opt.z_flat);

  if (v.model == GrowthModel::bounded && log_flat && lin_flat && !q95_up) {
    v.status = Tightness::tight;
  } else if (v.model == GrowthModel::log && rising(v.log_fit.slope, v.log_slope_se, opt.z_flat)) {
    v.status = Tightness::not_tight;
    v.note = "variance grows like ln L";
  } else if (v.model == GrowthModel::linear && rising(v.linear_fit.slope, v.linear_slope_se, opt.z_flat)) {
    v.status = Tightness::not_tight;
    v.note = "variance grows like L";
  } else {
    v.status = Tightness::inconclusive;
    if (v.model == GrowthModel::bounded && q95_up) v.note = "q95 |F| still rising";
    else if (v.model == GrowthModel::bounded) v.note = "constant preferred but a slope is not flat";
    else v.note = "growth model preferred but slope not significant";
  }
  v.is_tight = v.status == Tightness::tight;
  return v;
}

// ---------------------------------------------------------------- correlations

CorrelationSummary correlation_sum(std::span<const LatticeChargeConfiguration> ens, std::size_t max_lag) {
  if (ens.empty()) throw ArgumentError("correlation_sum: empty ensemble");
  std::size_t sites = ens.front().size();
  for (const auto& c : ens) sites = std::min(sites, c.size());
  if (max_lag == 0) throw ArgumentError("correlation_sum: max_lag must be positive");
  if (max_lag > sites / 4)
    throw ArgumentError("correlation_sum: max_lag " + std::to_string(max_lag) + " exceeds n_sites/4 = " +
                        std::to_string(sites / 4));

  double total = 0.0, count = 0.0;
  for (const auto& c : ens)
    for (std::size_t k = 0; k < c.size(); ++k) {
      total += c.charge(k);
      count += 1.0;
    }
  const double qbar = total / count;

  const bool by_replica = ens.size() >= kMinReplicaGroups;
  const std::size_t per = by_replica ? 1 : kBlocksPerReplica;
  const std::size_t n_groups = ens.size() * per;
  const std::size_t nl = max_lag + 1;
  std::vector<double> sums(n_groups * nl, 0.0), cnts(n_groups * nl, 0.0);

  std::vector<double> d;
  for (std::size_t r = 0; r < ens.size(); ++r) {
    const auto& cfg = ens[r];
    const std::size_t n = cfg.size();
    d.resize(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = cfg.charge(k) - qbar;
    for (std::size_t b = 0; b < per; ++b) {
      const std::size_t k0 = b * n / per, k1 = (b + 1) * n / per;
      const std::size_t g = r * per + b;
      for (std::size_t lag = 0; lag < nl; ++lag) {
        double s = 0.0;
        std::size_t kend = k1;
        if (!cfg.periodic()) kend = std::min(k1, n - lag);
        if (cfg.periodic()) {
          for (std::size_t k = k0; k < k1; ++k) {
            const std::size_t j = k + lag < n ? k + lag : k + lag - n;
            s += d[k] * d[j];
          }
        } else {
          for (std::size_t k = k0; k < kend; ++k) s += d[k] * d[k + lag];
        }
        sums[g * nl + lag] += s;
        cnts[g * nl + lag] += static_cast<double>(kend > k0 ? kend - k0 : 0);
      }
    }
  }

  std::vector<double> tot_s(nl, 0.0), tot_c(nl, 0.0);
  for (std::size_t g = 0; g < n_groups; ++g)
    for (std::size_t l = 0; l < nl; ++l) {
      tot_s[l] += sums[g * nl + l];
      tot_c[l] += cnts[g * nl + l];
    }
  auto reduce = [&](auto c_of, double& s0, double& s1, std::vector<double>* cs) {
    s0 = 0.0;
    s1 = 0.0;
    for (std::size_t l = 0; l < nl; ++l) {
      const double c = c_of(l);
      if (cs) (*cs)[l] = c;
      s0 += l == 0 ? c : 2.0 * c;
      s1 += static_cast<double>(l) * std::abs(c);
    }
  };

  CorrelationSummary out;
  out.max_lag = max_lag;
  out.stderr_method = by_replica ? "replica-jackknife" : "block-jackknife";
  out.c.assign(nl, 0.0);
  reduce([&](std::size_t l) { return tot_s[l] / tot_c[l]; }, out.S0, out.S1, &out.c);

  std::vector<std::vector<double>> loo_c(nl);
  std::vector<double> loo_s0, loo_s1;
  std::vector<double> tmp(nl);
  for (std::size_t g = 0; g < n_groups; ++g) {
    double s0 = 0.0, s1 = 0.0;
    bool ok = true;
    reduce(
        [&](std::size_t l) {
          const double cn = tot_c[l] - cnts[g * nl + l];
          if (cn <= 0.0) {
            ok = false;
            return 0.0;
          }
          return (tot_s[l] - sums[g * nl + l]) / cn;
        },
        s0, s1, &tmp);
    if (!ok) continue;
    for (std::size_t l = 0; l < nl; ++l) loo_c[l].push_back(tmp[l]);
    loo_s0.push_back(s0);
    loo_s1.push_back(s1);
  }
  out.c_stderr.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) out.c_stderr[l] = stats::jackknife_stderr(loo_c[l]);
  out.S0_stderr = stats::jackknife_stderr(loo_s0);
  out.S1_stderr = stats::jackknife_stderr(loo_s1);
  return out;
}

}  // namespace tightline
