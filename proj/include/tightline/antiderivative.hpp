#pragma once

#include <span>
#include <string>
#include <vector>

#include "tightline/core.hpp"

namespace tightline {

struct LadderRung {
  double t = 0.0;
  double value = 0.0;  // I(t)
};

/// Estimated field E(x) of one configuration, based at the window origin
/// (window lo for continuum input, site 0 for lattices).
struct AntiderivativeTrace {
  double base_value = 0.0;  // E0 = E(origin)
  double e_const = 0.0;
  double rho = 0.0;
  double unit = 1.0;
  double origin = 0.0;
  bool lattice = false;
  std::vector<LadderRung> ladder;
  std::vector<double> grid;
  std::vector<double> values;
  bool converged = false;
  double tol = 0.0;
  /// Largest successive difference among the top three rungs.
  double est_error = 0.0;
};

struct CesaroOptions {
  double e_const = 0.0;
  /// Convergence threshold on |I(t_max) - I(t_prev)|; negative means 1e-3 * e.
  double tol = -1.0;
  /// Points at which to tabulate E(x) = E0 + F(origin, x).
  std::vector<double> grid;
};

/// I(t) = sum_{origin < x_i <= origin + t} q_i (1 - (x_i - origin)/t) - rho t / 2,
/// which is (1/t) times the integral of F(origin, origin + s) over s in [0, t].
double cesaro_partial(const PointChargeConfiguration& cfg, double rho, double t);
/// Lattice analogue over sites 1..floor(t).
double cesaro_partial(const LatticeChargeConfiguration& cfg, double rho, double t);

/// {2^6, ..., 2^13} restricted to t <= window; if fewer than three rungs
/// survive, {window/4, window/2, window}.
std::vector<double> default_t_ladder(double window);

/// E0 = E_const - I(t_max); converged when the top two rungs differ by < tol.
AntiderivativeTrace cesaro_field(const PointChargeConfiguration& cfg, double rho, std::span<const double> t_ladder,
                                 const CesaroOptions& opt = {});
AntiderivativeTrace cesaro_field(const LatticeChargeConfiguration& cfg, double rho, std::span<const double> t_ladder,
                                 const CesaroOptions& opt = {});

/// E0 + F(origin, x).
double telescoped_field(const AntiderivativeTrace& trace, const PointChargeConfiguration& cfg, double x);
double telescoped_field(const AntiderivativeTrace& trace, const LatticeChargeConfiguration& cfg, double x);

/// M[Y]: the smallest level M with at most half of the (uniform-grid) samples
/// at or above M, i.e. the ceil(n/2)-th order statistic. Needs >= 1000 samples.
double median_functional(std::span<const double> samples);

/// E0 = E_const - mean of F(origin, s_j) over a midpoint grid of n points on
/// [0, length]: the plain-average construction, computed by quadrature.
double plain_average_base(const PointChargeConfiguration& cfg, double rho, double length, std::size_t n_grid = 4096,
                          double e_const = 0.0);
/// E0 = E_const - M[F(origin, s_j)] on the same grid.
double median_centered_base(const PointChargeConfiguration& cfg, double rho, double length,
                            std::size_t n_grid = 4096, double e_const = 0.0);

enum class Centering { median, mean };

struct CoboundarySolution {
  /// g_0..g_n, with f_k = g_{k+1} - g_k for k = 0..n-1.
  std::vector<double> g_values;
  double residual = 0.0;  // max_k |f_k - (g_{k+1} - g_k)|
  double spread = 0.0;    // 97.5% minus 2.5% quantile of g
  Centering centering = Centering::median;
};

/// f_k = q_k - rho; g_j = P_j - M[P] with P_j = sum_{k<j} f_k evaluated as
/// j (gamma - rho) + e K_j (K_j the integer prefix of the multiples) in one
/// fused multiply-add, so g carries no accumulated summation error.
CoboundarySolution lattice_coboundary(const LatticeChargeConfiguration& cfg, double rho,
                                      Centering centering = Centering::median);

}  // namespace tightline
