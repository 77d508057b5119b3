#include "tightline/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tightline/errors.hpp"

namespace tightline {

namespace {

std::vector<std::int64_t> prefix_sums(std::span<const std::int64_t> m) {
  std::vector<std::int64_t> prefix(m.size() + 1, 0);
  std::partial_sum(m.begin(), m.end(), prefix.begin() + 1);
  return prefix;
}

// floor((x - lo) / L) with a correction so that x - k L lands in [lo, hi).
std::int64_t period_index(double x, double lo, double length) {
  auto k = static_cast<std::int64_t>(std::floor((x - lo) / length));
  double r = x - static_cast<double>(k) * length;
  if (r < lo) --k;
  else if (r >= lo + length) ++k;
  return k;
}

std::int64_t floor_div(std::int64_t a, std::int64_t n) {
  std::int64_t q = a / n;
  if ((a % n != 0) && ((a < 0) != (n < 0))) --q;
  return q;
}

void check_interval(double a, double b) {
  if (!(a < b)) throw ArgumentError("interval (a,b] requires a < b");
  if (!std::isfinite(a) || !std::isfinite(b)) throw ArgumentError("interval bounds must be finite");
}

template <class Summary, class Cfg>
Summary pooled_density(std::span<const Cfg> ensemble, auto length_of, auto charge_of) {
  if (ensemble.empty()) throw ArgumentError("estimate_density: empty ensemble");
  double total_charge = 0.0;
  double total_length = 0.0;
  std::vector<double> per_replica;
  per_replica.reserve(ensemble.size());
  for (const auto& cfg : ensemble) {
    const double len = length_of(cfg);
    if (!(len > 0.0)) throw ArgumentError("estimate_density: window length must be positive");
    const double q = charge_of(cfg);
    total_charge += q;
    total_length += len;
    per_replica.push_back(q / len);
  }
  Summary s;
  s.rho = total_charge / total_length;
  s.n_configs = ensemble.size();
  if (ensemble.size() > 1) {
    const double mean = std::accumulate(per_replica.begin(), per_replica.end(), 0.0) /
                        static_cast<double>(per_replica.size());
    double ss = 0.0;
    for (double r : per_replica) ss += (r - mean) * (r - mean);
    const double n = static_cast<double>(per_replica.size());
    s.rho_stderr = std::sqrt(ss / (n - 1.0) / n);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------- continuum

PointChargeConfiguration::PointChargeConfiguration(std::vector<double> positions,
                                                   std::vector<std::int64_t> multiples,
                                                   Window window, double unit, Boundary boundary,
                                                   Provenance provenance)
    : positions_(std::move(positions)),
      multiples_(std::move(multiples)),
      window_(window),
      unit_(unit),
      boundary_(boundary),
      provenance_(provenance) {
  if (positions_.size() != multiples_.size())
    throw ArgumentError("PointChargeConfiguration: positions and charges differ in length");
  if (!(window_.hi > window_.lo)) throw ArgumentError("PointChargeConfiguration: empty window");
  if (!(unit_ > 0.0)) throw ArgumentError("PointChargeConfiguration: charge unit must be positive");
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const double p = positions_[i];
    if (!(p >= window_.lo && p < window_.hi))
      throw ArgumentError("PointChargeConfiguration: atom " + std::to_string(i) + " outside window");
    if (i > 0 && !(positions_[i - 1] < p))
      throw ArgumentError("PointChargeConfiguration: positions not strictly increasing at atom " +
                          std::to_string(i));
  }
  prefix_ = prefix_sums(multiples_);
}

PointChargeConfiguration PointChargeConfiguration::unit_charges(std::vector<double> positions,
                                                                Window window, Boundary boundary,
                                                                Provenance provenance) {
  std::vector<std::int64_t> ones(positions.size(), 1);
  return PointChargeConfiguration(std::move(positions), std::move(ones), window, 1.0, boundary,
                                  provenance);
}

std::int64_t PointChargeConfiguration::cumulative(double x) const {
  auto within = [&](double r) {
    auto it = std::upper_bound(positions_.begin(), positions_.end(), r);
    return prefix_[static_cast<std::size_t>(it - positions_.begin())];
  };
  if (!periodic()) {
    if (x < window_.lo || x > window_.hi)
      throw OutOfWindowError("coordinate " + std::to_string(x) + " outside window");
    return within(x);
  }
  const double len = window_.length();
  const std::int64_t k = period_index(x, window_.lo, len);
  return k * total_multiples() + within(x - static_cast<double>(k) * len);
}

// ---------------------------------------------------------------- lattice

LatticeChargeConfiguration::LatticeChargeConfiguration(std::vector<std::int64_t> multiples,
                                                       double gamma, double unit,
                                                       Boundary boundary, Provenance provenance)
    : multiples_(std::move(multiples)),
      gamma_(gamma),
      unit_(unit),
      boundary_(boundary),
      provenance_(provenance) {
  if (multiples_.empty()) throw ArgumentError("LatticeChargeConfiguration: needs at least one site");
  if (!(unit_ > 0.0)) throw ArgumentError("LatticeChargeConfiguration: charge unit must be positive");
  if (!std::isfinite(gamma_)) throw ArgumentError("LatticeChargeConfiguration: gamma must be finite");
  prefix_ = prefix_sums(multiples_);
}

LatticeChargeConfiguration LatticeChargeConfiguration::from_signs(std::span<const int> signs,
                                                                  Boundary boundary,
                                                                  Provenance provenance) {
  std::vector<std::int64_t> m(signs.size());
  for (std::size_t k = 0; k < signs.size(); ++k) {
    if (signs[k] == 1) m[k] = 0;
    else if (signs[k] == -1) m[k] = -1;
    else throw ArgumentError("from_signs: charges must be +1 or -1");
  }
  return LatticeChargeConfiguration(std::move(m), 1.0, 2.0, boundary, provenance);
}

std::int64_t LatticeChargeConfiguration::cumulative(double x) const {
  const auto n = static_cast<std::int64_t>(multiples_.size());
  const auto j = static_cast<std::int64_t>(std::floor(x)) + 1;  // number of sites <= x, from 0
  if (!periodic()) {
    if (j < 0 || j > n) throw OutOfWindowError("site index " + std::to_string(j - 1) + " outside lattice");
    return prefix_[static_cast<std::size_t>(j)];
  }
  const std::int64_t q = floor_div(j, n);
  const std::int64_t r = j - q * n;
  return q * total_multiples() + prefix_[static_cast<std::size_t>(r)];
}

// ---------------------------------------------------------------- queries

ExactCharge charge_in_interval(const PointChargeConfiguration& cfg, double a, double b) {
  check_interval(a, b);
  if (!cfg.periodic() && (a < cfg.window().lo || b > cfg.window().hi))
    throw OutOfWindowError("interval (" + std::to_string(a) + ", " + std::to_string(b) +
                           "] leaves the window");
  ExactCharge q;
  q.unit = cfg.unit();
  q.multiples = cfg.cumulative(b) - cfg.cumulative(a);
  return q;
}

ExactCharge charge_in_interval(const LatticeChargeConfiguration& cfg, double a, double b) {
  check_interval(a, b);
  const auto fa = static_cast<std::int64_t>(std::floor(a));
  const auto fb = static_cast<std::int64_t>(std::floor(b));
  if (!cfg.periodic() && (fa < -1 || fb > static_cast<std::int64_t>(cfg.size()) - 1))
    throw OutOfWindowError("interval (" + std::to_string(a) + ", " + std::to_string(b) +
                           "] leaves the lattice");
  ExactCharge q;
  q.unit = cfg.unit();
  q.gamma = cfg.gamma();
  q.sites = fb - fa;
  q.multiples = cfg.cumulative(b) - cfg.cumulative(a);
  return q;
}

double centered_sum(const PointChargeConfiguration& cfg, double a, double b, double rho) {
  return charge_in_interval(cfg, a, b).value() - rho * (b - a);
}

double centered_sum(const LatticeChargeConfiguration& cfg, double a, double b, double rho) {
  return charge_in_interval(cfg, a, b).value() - rho * (b - a);
}

PointChargeConfiguration rotate(const PointChargeConfiguration& cfg, double x) {
  if (!cfg.periodic()) throw ArgumentError("rotate: configuration is not periodic");
  const Window w = cfg.window();
  const double len = w.length();
  const double shift = x - std::floor(x / len) * len;  // in [0, len]
  std::vector<std::pair<double, std::int64_t>> atoms;
  atoms.reserve(cfg.size());
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    double p = cfg.positions()[i] - shift;
    if (p < w.lo) p += len;
    if (p >= w.hi) p = w.lo;
    atoms.emplace_back(p, cfg.multiples()[i]);
  }
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> pos(atoms.size());
  std::vector<std::int64_t> m(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    pos[i] = atoms[i].first;
    m[i] = atoms[i].second;
  }
  return PointChargeConfiguration(std::move(pos), std::move(m), w, cfg.unit(), cfg.boundary(),
                                  cfg.provenance());
}

LatticeChargeConfiguration rotate(const LatticeChargeConfiguration& cfg, std::int64_t x) {
  if (!cfg.periodic()) throw ArgumentError("rotate: configuration is not periodic");
  const auto n = static_cast<std::int64_t>(cfg.size());
  const std::int64_t s = ((x % n) + n) % n;
  std::vector<std::int64_t> m(cfg.size());
  for (std::int64_t k = 0; k < n; ++k) m[static_cast<std::size_t>(k)] = cfg.multiples()[static_cast<std::size_t>((k + s) % n)];
  return LatticeChargeConfiguration(std::move(m), cfg.gamma(), cfg.unit(), cfg.boundary(),
                                    cfg.provenance());
}

// ---------------------------------------------------------------- density

double reduce_alpha(double rho, double gamma, double unit) {
  double a = std::fmod(rho - gamma, unit);
  if (a < 0.0) a += unit;
  if (a >= unit) a = 0.0;
  return a;
}

DensitySummary estimate_density(std::span<const PointChargeConfiguration> ensemble) {
  auto s = pooled_density<DensitySummary>(
      ensemble, [](const PointChargeConfiguration& c) { return c.window().length(); },
      [](const PointChargeConfiguration& c) {
        return c.unit() * static_cast<double>(c.total_multiples());
      });
  s.unit = ensemble.front().unit();
  return s;
}

DensitySummary estimate_density(std::span<const LatticeChargeConfiguration> ensemble) {
  auto s = pooled_density<DensitySummary>(
      ensemble, [](const LatticeChargeConfiguration& c) { return static_cast<double>(c.size()); },
      [](const LatticeChargeConfiguration& c) {
        return c.gamma() * static_cast<double>(c.size()) +
               c.unit() * static_cast<double>(c.total_multiples());
      });
  const auto& first = ensemble.front();
  for (const auto& c : ensemble)
    if (c.gamma() != first.gamma() || c.unit() != first.unit())
      throw ArgumentError("estimate_density: ensemble mixes charge alphabets");
  s.lattice = true;
  s.gamma = first.gamma();
  s.unit = first.unit();
  s.alpha = reduce_alpha(s.rho, s.gamma, s.unit);
  s.alpha_stderr = s.rho_stderr;
  const double dist = std::min(s.alpha, s.unit - s.alpha);
  s.alpha_degenerate = dist <= 3.0 * s.alpha_stderr;
  return s;
}

}  // namespace tightline
