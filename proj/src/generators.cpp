#include "tightline/generators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tightline/errors.hpp"
#include "tightline/stats.hpp"

namespace tightline {

namespace {

Provenance prov_of(const SeededRng& rng) { return {rng.seed(), rng.stream_id()}; }

double wrap_into(double x, double length) {
  double r = std::fmod(x, length);
  if (r < 0.0) r += length;
  if (r >= length) r = 0.0;
  return r;
}

PointChargeConfiguration periodic_unit_atoms(std::vector<double> pos, double length, Provenance prov) {
  std::sort(pos.begin(), pos.end());
  return PointChargeConfiguration::unit_charges(std::move(pos), {0.0, length}, Boundary::periodic, prov);
}

constexpr std::size_t kTuneBlock = 20;
constexpr std::size_t kMinPilot = 200;

template <class Chain>
ContinuumEnsemble run_chain(Chain& chain, std::size_t sweeps, std::size_t burn_in, std::size_t thin_req,
                            const SeededRng& rng, const SnapshotSink& sink) {
  ContinuumEnsemble out;
  McDiagnostics diag;
  const double max_scale = chain.length() / 2.0;

  // tuning on the first half of burn-in
  const std::size_t tune = burn_in / 2;
  for (std::size_t s = 0; s < tune; ++s) {
    chain.sweep();
    if ((s + 1) % kTuneBlock == 0 && chain.proposed() > 0) {
      const double acc = static_cast<double>(chain.accepted()) / static_cast<double>(chain.proposed());
      chain.scale() = std::clamp(chain.scale() * std::clamp(acc / 0.4, 0.5, 2.0), 1e-9 * max_scale, max_scale);
      chain.reset_counters();
    }
  }
  diag.proposal_scale = chain.scale();

  // pilot at the frozen scale for the autocorrelation time
  const std::size_t pilot = std::max(burn_in - tune, kMinPilot);
  std::vector<double> series;
  series.reserve(pilot);
  for (std::size_t s = 0; s < pilot; ++s) {
    chain.sweep();
    series.push_back(chain.quarter_charge());
  }
  diag.tau_int = stats::integrated_autocorr_time(series);
  diag.thin = thin_req > 0 ? thin_req : static_cast<std::size_t>(std::floor(2.0 * diag.tau_int)) + 1;

  chain.reset_counters();
  series.clear();
  const std::size_t production = sweeps - burn_in;
  for (std::size_t s = 1; s <= production; ++s) {
    chain.sweep();
    if (s % diag.thin != 0) continue;
    series.push_back(chain.quarter_charge());
    auto snap = chain.snapshot(prov_of(rng));
    if (sink) sink(snap);
    else out.configs.push_back(std::move(snap));
  }
  diag.sweeps_run = tune + pilot + production;
  diag.acceptance = chain.proposed() > 0
                        ? static_cast<double>(chain.accepted()) / static_cast<double>(chain.proposed())
                        : 0.0;
  if (series.size() >= 8) diag.tau_int_thinned = stats::integrated_autocorr_time(series);
  if (diag.acceptance < 0.1 || diag.acceptance > 0.9) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "acceptance rate %.3f outside [0.1, 0.9] after tuning", diag.acceptance);
    diag.warnings.emplace_back(buf);
  }
  if (diag.tau_int_thinned >= 0.5 * static_cast<double>(diag.thin) + 0.5 && series.size() >= 8) {
    diag.warnings.emplace_back("snapshot series still correlated (tau_int of thinned series " +
                               std::to_string(diag.tau_int_thinned) + ")");
  }
  out.chains.push_back(std::move(diag));
  return out;
}

void check_chain_params(std::size_t sweeps, std::size_t burn_in, double beta, double scale) {
  if (!(sweeps > burn_in)) throw ArgumentError("sampler: sweeps must exceed burn_in");
  if (!(beta > 0.0)) throw ArgumentError("sampler: beta must be positive");
  if (!(scale > 0.0)) throw ArgumentError("sampler: proposal_scale must be positive");
}

}  // namespace

// ---------------------------------------------------------------- simple processes

PointChargeConfiguration gen_shifted_lattice(std::size_t n, double u, Provenance prov) {
  if (n == 0) throw ArgumentError("gen_shifted_lattice: n must be positive");
  if (!(u >= 0.0 && u < 1.0)) throw ArgumentError("gen_shifted_lattice: u outside [0, 1)");
  std::vector<double> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[k] = static_cast<double>(k) + u;
  return PointChargeConfiguration::unit_charges(std::move(pos), {0.0, static_cast<double>(n)},
                                                Boundary::periodic, prov);
}

PointChargeConfiguration gen_shifted_lattice(std::size_t n, SeededRng& rng) {
  return gen_shifted_lattice(n, rng.uniform(), prov_of(rng));
}

PointChargeConfiguration gen_jittered_lattice(std::size_t n, double u, SeededRng& rng) {
  if (n == 0) throw ArgumentError("gen_jittered_lattice: n must be positive");
  const double len = static_cast<double>(n);
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> pos(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double eta = 0.5 - rng.uniform();
      pos[k] = wrap_into(static_cast<double>(k) + u + eta, len);
    }
    std::sort(pos.begin(), pos.end());
    if (std::adjacent_find(pos.begin(), pos.end()) == pos.end())
      return PointChargeConfiguration::unit_charges(std::move(pos), {0.0, len}, Boundary::periodic, prov_of(rng));
  }
  throw GenerationError("gen_jittered_lattice: repeated coincident atoms");
}

PointChargeConfiguration gen_jittered_lattice(std::size_t n, SeededRng& rng) {
  const double u = rng.uniform();
  return gen_jittered_lattice(n, u, rng);
}

PointChargeConfiguration gen_poisson(double length, double rho, SeededRng& rng) {
  if (!(length > 0.0)) throw ArgumentError("gen_poisson: length must be positive");
  if (!(rho > 0.0)) throw ArgumentError("gen_poisson: rho must be positive");
  for (int attempt = 0; attempt < 16; ++attempt) {
    const auto count = rng.poisson(rho * length);
    std::vector<double> pos(count);
    for (auto& p : pos) p = rng.uniform() * length;
    std::sort(pos.begin(), pos.end());
    if (std::adjacent_find(pos.begin(), pos.end()) == pos.end())
      return PointChargeConfiguration::unit_charges(std::move(pos), {0.0, length}, Boundary::open, prov_of(rng));
  }
  throw GenerationError("gen_poisson: repeated coincident atoms");
}

LatticeChargeConfiguration gen_iid_sign_chain(std::size_t n, SeededRng& rng) {
  if (n == 0) throw ArgumentError("gen_iid_sign_chain: n must be positive");
  std::vector<int> s(n);
  for (auto& v : s) v = rng.uniform() < 0.5 ? 1 : -1;
  return LatticeChargeConfiguration::from_signs(s, Boundary::open, prov_of(rng));
}

// ---------------------------------------------------------------- jellium

JelliumChain::JelliumChain(std::size_t n, double beta, double rho, double scale, SeededRng& rng)
    : rng_(rng), z_(n), beta_(beta), rho_(rho), length_(static_cast<double>(n) / rho), scale_(scale) {
  if (n == 0) throw ArgumentError("JelliumChain: needs at least one particle");
  if (!(rho > 0.0)) throw ArgumentError("JelliumChain: background density must be positive");
  // start from the crystal at a random offset
  const double off = rng_.uniform() / rho_;
  for (std::size_t i = 0; i < n; ++i) z_[i] = off + static_cast<double>(i) / rho_;
  refresh_sums();
}

void JelliumChain::refresh_sums() {
  s1_ = s2_ = 0.0;
  for (std::size_t i = 0; i < z_.size(); ++i) {
    const double d = z_[i] - (static_cast<double>(i) + 0.5) / rho_;
    s1_ += d;
    s2_ += d * d;
  }
}

void JelliumChain::sweep() {
  const std::size_t n = z_.size();
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(rng_.uniform() * nn);
    const double zn = z_[i] + scale_ * (2.0 * rng_.uniform() - 1.0);
    ++proposed_;
    const double lo = i > 0 ? z_[i - 1] : z_[n - 1] - length_;
    const double hi = i + 1 < n ? z_[i + 1] : z_[0] + length_;
    if (zn <= lo || zn >= hi) continue;
    const double y = (static_cast<double>(i) + 0.5) / rho_;
    const double d_old = z_[i] - y, d_new = zn - y;
    const double s1n = s1_ - d_old + d_new;
    const double s2n = s2_ - d_old * d_old + d_new * d_new;
    const double du = 0.5 * rho_ * ((s2n - s1n * s1n / nn) - (s2_ - s1_ * s1_ / nn));
    if (du <= 0.0 || rng_.uniform() < std::exp(-beta_ * du)) {
      z_[i] = zn;
      s1_ = s1n;
      s2_ = s2n;
      ++accepted_;
    }
  }
  // rigid translation, energy neutral
  const double shift = rng_.uniform() * length_;
  for (auto& v : z_) v += shift;
  while (z_[0] >= length_)
    for (auto& v : z_) v -= length_;
  while (z_[0] < 0.0)
    for (auto& v : z_) v += length_;
  refresh_sums();
}

double JelliumChain::energy() const {
  const double n = static_cast<double>(z_.size());
  return 0.5 * rho_ * (s2_ - s1_ * s1_ / n);
}

double JelliumChain::quarter_charge() const {
  const double q = length_ / 4.0;
  double count = 0.0;
  for (double v : z_) {
    const double w = v >= length_ ? v - length_ : v;
    if (w > 0.0 && w <= q) count += 1.0;
  }
  return count;
}

PointChargeConfiguration JelliumChain::snapshot(Provenance prov) const {
  std::vector<double> pos(z_.size());
  for (std::size_t i = 0; i < z_.size(); ++i) pos[i] = wrap_into(z_[i], length_);
  return periodic_unit_atoms(std::move(pos), length_, prov);
}

ContinuumEnsemble gen_jellium(const JelliumParams& p, SeededRng& rng, SnapshotSink sink) {
  check_chain_params(p.sweeps, p.burn_in, p.beta, p.proposal_scale);
  if (p.n_particles == 0) throw ArgumentError("gen_jellium: n_particles must be positive");
  if (!(p.background_density > 0.0)) throw ArgumentError("gen_jellium: background_density must be positive");
  JelliumChain chain(p.n_particles, p.beta, p.background_density, p.proposal_scale, rng);
  return run_chain(chain, p.sweeps, p.burn_in, p.thin, rng, sink);
}

// ---------------------------------------------------------------- two-component

double periodic_green(double r, double length) {
  double x = std::fmod(r, length);
  if (x < 0.0) x += length;
  return 0.5 * (x * x / length - x);
}

TwoComponentChain::TwoComponentChain(std::vector<int> signs, double length, double beta, double unit,
                                     double scale, SeededRng& rng)
    : rng_(rng), x_(signs.size()), q_(std::move(signs)), length_(length), beta_(beta), unit_(unit), scale_(scale) {
  if (q_.empty()) throw ArgumentError("TwoComponentChain: needs particles");
  if (!(length > 0.0)) throw ArgumentError("TwoComponentChain: length must be positive");
  for (int s : q_)
    if (s != 1 && s != -1) throw ArgumentError("TwoComponentChain: charges must be +-1 units");
  for (auto& v : x_) v = rng_.uniform() * length_;
}

void TwoComponentChain::sweep() {
  const std::size_t n = x_.size();
  const double nn = static_cast<double>(n);
  const double e2 = unit_ * unit_;
  const double inv_l = 1.0 / length_;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(rng_.uniform() * nn);
    double xn = x_[i] + scale_ * (2.0 * rng_.uniform() - 1.0);
    if (xn < 0.0) xn += length_;
    if (xn >= length_) xn -= length_;
    if (xn >= length_ || xn < 0.0) xn = wrap_into(xn, length_);
    ++proposed_;
    const double xo = x_[i];
    double du = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double r1 = xo - x_[j];
      if (r1 < 0.0) r1 += length_;
      double r2 = xn - x_[j];
      if (r2 < 0.0) r2 += length_;
      du += static_cast<double>(q_[j]) * (0.5 * (r2 * r2 * inv_l - r2) - 0.5 * (r1 * r1 * inv_l - r1));
    }
    du *= e2 * static_cast<double>(q_[i]);
    if (du <= 0.0 || rng_.uniform() < std::exp(-beta_ * du)) {
      x_[i] = xn;
      ++accepted_;
    }
  }
  const double shift = rng_.uniform() * length_;
  for (auto& v : x_) v = wrap_into(v + shift, length_);
}

double TwoComponentChain::energy() const {
  double u = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i)
    for (std::size_t j = i + 1; j < x_.size(); ++j)
      u += static_cast<double>(q_[i] * q_[j]) * periodic_green(x_[i] - x_[j], length_);
  return unit_ * unit_ * u;
}

double TwoComponentChain::quarter_charge() const {
  const double q = length_ / 4.0;
  double total = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i)
    if (x_[i] > 0.0 && x_[i] <= q) total += static_cast<double>(q_[i]);
  return total;
}

PointChargeConfiguration TwoComponentChain::snapshot(Provenance prov) const {
  std::vector<std::size_t> order(x_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x_[a] < x_[b]; });
  std::vector<double> pos(x_.size());
  std::vector<std::int64_t> m(x_.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    pos[k] = x_[order[k]];
    m[k] = q_[order[k]];
  }
  return PointChargeConfiguration(std::move(pos), std::move(m), {0.0, length_}, unit_, Boundary::periodic, prov);
}

ContinuumEnsemble gen_two_component(const TwoComponentParams& p, SeededRng& rng, SnapshotSink sink) {
  check_chain_params(p.sweeps, p.burn_in, p.beta, p.proposal_scale);
  if (p.n_pairs == 0) throw ArgumentError("gen_two_component: n_pairs must be positive");
  if (!(p.unit > 0.0)) throw ArgumentError("gen_two_component: unit must be positive");
  std::vector<int> signs(2 * p.n_pairs);
  for (std::size_t i = 0; i < signs.size(); ++i) signs[i] = i % 2 == 0 ? 1 : -1;
  TwoComponentChain chain(std::move(signs), p.length, p.beta, p.unit, p.proposal_scale, rng);
  return run_chain(chain, p.sweeps, p.burn_in, p.thin, rng, sink);
}

// ---------------------------------------------------------------- energies

double jellium_line_energy(std::span<const double> positions, double rho) {
  std::vector<double> x(positions.begin(), positions.end());
  std::sort(x.begin(), x.end());
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - (static_cast<double>(i) + 0.5) / rho;
    u += d * d;
  }
  return 0.5 * rho * u;
}

double jellium_ring_energy(std::span<const double> positions, double rho) {
  std::vector<double> x(positions.begin(), positions.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - (static_cast<double>(i) + 0.5) / rho;
    s1 += d;
    s2 += d * d;
  }
  return 0.5 * rho * (s2 - s1 * s1 / n);
}

double two_component_energy(const PointChargeConfiguration& cfg) {
  const auto x = cfg.positions();
  const auto m = cfg.multiples();
  const double len = cfg.window().length();
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      u += static_cast<double>(m[i] * m[j]) * periodic_green(x[i] - x[j], len);
  return cfg.unit() * cfg.unit() * u;
}

// ---------------------------------------------------------------- cluster chain

LatticeChargeConfiguration gen_cluster_chain(const ClusterChainParams& p, SeededRng& rng) {
  if (p.n_sites < 2) throw ArgumentError("gen_cluster_chain: n_sites must be at least 2");
  if (!(p.mean_cluster_size >= 2.0) || !std::isfinite(p.mean_cluster_size))
    throw ArgumentError("gen_cluster_chain: mean cluster size must be finite and >= 2");
  const double prob = 2.0 / p.mean_cluster_size;
  const auto lead = static_cast<std::int64_t>(std::ceil(64.0 * p.mean_cluster_size));
  std::int64_t pos = -lead - static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lead)));
  const auto n = static_cast<std::int64_t>(p.n_sites);

  std::vector<int> signs(p.n_sites, 0);
  std::vector<int> cluster;
  while (pos < n) {
    const auto m = static_cast<std::int64_t>(rng.geometric_trials(prob));
    cluster.assign(static_cast<std::size_t>(2 * m), -1);
    std::fill(cluster.begin(), cluster.begin() + m, 1);
    std::shuffle(cluster.begin(), cluster.end(), rng);
    for (std::int64_t k = 0; k < 2 * m; ++k) {
      const std::int64_t site = pos + k;
      if (site >= 0 && site < n) signs[static_cast<std::size_t>(site)] = cluster[static_cast<std::size_t>(k)];
    }
    pos += 2 * m;
  }
  return LatticeChargeConfiguration::from_signs(signs, Boundary::open, prov_of(rng));
}

// ---------------------------------------------------------------- random matrices

double semicircle_count(double x, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double t = std::clamp(x / (2.0 * std::sqrt(nn)), -1.0, 1.0);
  return nn * (0.5 + (t * std::sqrt(1.0 - t * t) + std::asin(t)) / std::numbers::pi);
}

PointChargeConfiguration gen_rmt_bulk(std::size_t n, SeededRng& rng) {
  if (n < 64) throw ArgumentError("gen_rmt_bulk: n must be at least 64");
  const auto dim = static_cast<Eigen::Index>(n);
  const double nn = static_cast<double>(n);
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::VectorXd diag(dim), sub(dim - 1);
    for (Eigen::Index i = 0; i < dim; ++i) diag(i) = rng.normal();
    for (Eigen::Index i = 0; i + 1 < dim; ++i)
      sub(i) = rng.chi(2.0 * static_cast<double>(dim - 1 - i)) / std::numbers::sqrt2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) continue;
    const Eigen::VectorXd& ev = es.eigenvalues();
    std::vector<double> pos;
    pos.reserve(n / 2 + 8);
    const double lo = nn / 4.0, hi = 3.0 * nn / 4.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double u = semicircle_count(ev(i), n);
      if (u >= lo && u < hi) pos.push_back(u - lo);
    }
    if (std::adjacent_find(pos.begin(), pos.end(), std::greater_equal<>()) != pos.end()) continue;
    return PointChargeConfiguration::unit_charges(std::move(pos), {0.0, hi - lo}, Boundary::open, prov_of(rng));
  }
  throw GenerationError("gen_rmt_bulk: tridiagonal eigensolver failed repeatedly");
}

}  // namespace tightline
