#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tightline {

enum class Boundary { open, periodic };

/// Half-open coordinate window [lo, hi).
struct Window {
  double lo = 0.0;
  double hi = 0.0;
  double length() const noexcept { return hi - lo; }
};

/// Where a sampled configuration came from.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Charge in an interval, kept as exact integers: `multiples` units of e
/// plus `sites` lattice sites each carrying the offset gamma. Continuum
/// configurations always report sites == 0.
struct ExactCharge {
  std::int64_t multiples = 0;
  std::int64_t sites = 0;
  double unit = 1.0;
  double gamma = 0.0;

  double value() const noexcept {
    return gamma * static_cast<double>(sites) + unit * static_cast<double>(multiples);
  }
};

/// Finite window of point charges on the line. Atoms are strictly increasing
/// inside [lo, hi) and every charge is an integer multiple m of the unit e.
class PointChargeConfiguration {
 public:
  PointChargeConfiguration() = default;
  PointChargeConfiguration(std::vector<double> positions, std::vector<std::int64_t> multiples,
                           Window window, double unit = 1.0, Boundary boundary = Boundary::open,
                           Provenance provenance = {});

  /// All atoms carry one unit of charge (a plain point process).
  static PointChargeConfiguration unit_charges(std::vector<double> positions, Window window,
                                               Boundary boundary = Boundary::open,
                                               Provenance provenance = {});

  std::span<const double> positions() const noexcept { return positions_; }
  std::span<const std::int64_t> multiples() const noexcept { return multiples_; }
  std::size_t size() const noexcept { return positions_.size(); }
  const Window& window() const noexcept { return window_; }
  double unit() const noexcept { return unit_; }
  Boundary boundary() const noexcept { return boundary_; }
  bool periodic() const noexcept { return boundary_ == Boundary::periodic; }
  const Provenance& provenance() const noexcept { return provenance_; }
  std::int64_t total_multiples() const noexcept { return prefix_.back(); }

  /// Sum of multiples over atoms at positions <= x. On periodic windows the
  /// configuration is extended periodically with C(lo) counting atoms at lo.
  std::int64_t cumulative(double x) const;

 private:
  std::vector<double> positions_;
  std::vector<std::int64_t> multiples_;
  std::vector<std::int64_t> prefix_{0};
  Window window_{};
  double unit_ = 1.0;
  Boundary boundary_ = Boundary::open;
  Provenance provenance_{};
};

/// Charges q_k = gamma + m_k * e on sites k = 0..n-1.
class LatticeChargeConfiguration {
 public:
  LatticeChargeConfiguration() = default;
  LatticeChargeConfiguration(std::vector<std::int64_t> multiples, double gamma, double unit,
                             Boundary boundary = Boundary::open, Provenance provenance = {});

  /// Lattice of +-1 charges written as gamma = 1, e = 2.
  static LatticeChargeConfiguration from_signs(std::span<const int> signs,
                                               Boundary boundary = Boundary::open,
                                               Provenance provenance = {});

  std::span<const std::int64_t> multiples() const noexcept { return multiples_; }
  std::size_t size() const noexcept { return multiples_.size(); }
  double gamma() const noexcept { return gamma_; }
  double unit() const noexcept { return unit_; }
  Boundary boundary() const noexcept { return boundary_; }
  bool periodic() const noexcept { return boundary_ == Boundary::periodic; }
  const Provenance& provenance() const noexcept { return provenance_; }
  double charge(std::size_t k) const noexcept {
    return gamma_ + unit_ * static_cast<double>(multiples_[k]);
  }
  std::int64_t total_multiples() const noexcept { return prefix_.back(); }

  /// Sum of multiples over sites j <= floor(x), periodically extended when
  /// the boundary is periodic.
  std::int64_t cumulative(double x) const;

 private:
  std::vector<std::int64_t> multiples_;
  std::vector<std::int64_t> prefix_{0};
  double gamma_ = 0.0;
  double unit_ = 1.0;
  Boundary boundary_ = Boundary::open;
  Provenance provenance_{};
};

/// Q((a,b]). Open windows require lo <= a < b <= hi (continuum) or sites
/// floor(a)+1 .. floor(b) inside 0..n-1 (lattice); periodic windows accept any
/// a < b and wrap.
ExactCharge charge_in_interval(const PointChargeConfiguration& cfg, double a, double b);
ExactCharge charge_in_interval(const LatticeChargeConfiguration& cfg, double a, double b);

/// F(a,b) = Q((a,b]) - rho (b - a).
double centered_sum(const PointChargeConfiguration& cfg, double a, double b, double rho);
double centered_sum(const LatticeChargeConfiguration& cfg, double a, double b, double rho);

/// Translate a periodic configuration: the result T_x(cfg) has its atoms at
/// p - x (mod window), so that querying (a,b] on it equals querying
/// (a+x, b+x] on cfg.
PointChargeConfiguration rotate(const PointChargeConfiguration& cfg, double x);
LatticeChargeConfiguration rotate(const LatticeChargeConfiguration& cfg, std::int64_t x);

struct DensitySummary {
  double rho = 0.0;
  double rho_stderr = 0.0;
  std::size_t n_configs = 0;
  bool lattice = false;
  double gamma = 0.0;
  double unit = 1.0;
  /// (rho - gamma) reduced mod e into [0, e); lattice only.
  double alpha = 0.0;
  double alpha_stderr = 0.0;
  /// alpha within 3 stderr of 0 (mod e): lattice hypothesis (c) fails.
  bool alpha_degenerate = false;
};

/// Reduce (rho - gamma) into [0, e).
double reduce_alpha(double rho, double gamma, double unit);

/// Pooled charge density; stderr from the scatter of per-replica densities.
DensitySummary estimate_density(std::span<const PointChargeConfiguration> ensemble);
DensitySummary estimate_density(std::span<const LatticeChargeConfiguration> ensemble);

}  // namespace tightline
