#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tightline/core.hpp"
#include "tightline/rng.hpp"

namespace tightline {

// ---------------------------------------------------------------- simple processes

/// Atoms at k + u, k = 0..n-1, u ~ U[0,1); unit charges, periodic window [0, n).
PointChargeConfiguration gen_shifted_lattice(std::size_t n, SeededRng& rng);
PointChargeConfiguration gen_shifted_lattice(std::size_t n, double u, Provenance prov = {});

/// Atoms at k + u + eta_k with eta_k ~ U(-1/2, 1/2], wrapped into the periodic window [0, n).
PointChargeConfiguration gen_jittered_lattice(std::size_t n, SeededRng& rng);
PointChargeConfiguration gen_jittered_lattice(std::size_t n, double u, SeededRng& rng);

/// Homogeneous Poisson process of intensity rho on the open window [0, L).
PointChargeConfiguration gen_poisson(double length, double rho, SeededRng& rng);

/// i.i.d. fair +-1 charges (gamma = 1, e = 2), open.
LatticeChargeConfiguration gen_iid_sign_chain(std::size_t n, SeededRng& rng);

// ---------------------------------------------------------------- Gibbs samplers

struct McDiagnostics {
  double acceptance = 0.0;      // production phase
  double proposal_scale = 0.0;  // frozen value after burn-in tuning
  std::size_t thin = 1;
  double tau_int = 0.0;          // of Q(0, L/4], in sweeps, from the frozen-scale pilot
  double tau_int_thinned = 0.0;  // same observable on the emitted snapshot series
  std::size_t sweeps_run = 0;
  std::vector<std::string> warnings;
};

struct ContinuumEnsemble {
  std::vector<PointChargeConfiguration> configs;
  std::vector<McDiagnostics> chains;
};

struct JelliumParams {
  std::size_t n_particles = 256;
  double beta = 2.0;
  double background_density = 1.0;
  std::size_t sweeps = 2000;
  std::size_t burn_in = 500;
  double proposal_scale = 1.0;
  std::size_t thin = 0;  // 0 = choose from the measured autocorrelation time
};

struct TwoComponentParams {
  std::size_t n_pairs = 128;
  double beta = 1.0;
  double unit = 1.0;
  double length = 256.0;
  std::size_t sweeps = 2000;
  std::size_t burn_in = 500;
  double proposal_scale = 1.0;
  std::size_t thin = 0;
};

/// One Metropolis chain of the one-component plasma on a ring.
///
/// Particles keep their cyclic order (moves that would cross a neighbour are
/// rejected), so the state is the unwrapped sorted vector z with
/// z[0] in [0, L) and z[N-1] < z[0] + L. On that domain the periodic
/// Coulomb energy sum_{i<j} (r^2/L - r)/2 plus background equals
///   U = (rho/2) sum_i (d_i - mean d)^2,  d_i = z_i - (i + 1/2)/rho,
/// up to a constant, so a single-particle move costs O(1). Each sweep is N
/// single-particle proposals followed by one exact rigid translation.
class JelliumChain {
 public:
  JelliumChain(std::size_t n, double beta, double rho, double scale, SeededRng& rng);

  void sweep();
  /// Ring energy of the current state (the sorted-well form).
  double energy() const;
  /// Sum of unit charges in (0, L/4].
  double quarter_charge() const;
  PointChargeConfiguration snapshot(Provenance prov = {}) const;

  double length() const noexcept { return length_; }
  double& scale() noexcept { return scale_; }
  std::uint64_t accepted() const noexcept { return accepted_; }
  std::uint64_t proposed() const noexcept { return proposed_; }
  void reset_counters() noexcept { accepted_ = proposed_ = 0; }
  std::span<const double> unwrapped() const noexcept { return z_; }

 private:
  void refresh_sums();

  SeededRng& rng_;
  std::vector<double> z_;
  double beta_, rho_, length_, scale_;
  double s1_ = 0.0, s2_ = 0.0;
  std::uint64_t accepted_ = 0, proposed_ = 0;
};

/// Metropolis chain of +-e charges on a ring with the periodic Coulomb pair
/// potential e^2 q_i q_j (r^2/L - r)/2, r = (x_i - x_j) mod L. Particles may
/// pass each other. O(N) per single-particle move.
class TwoComponentChain {
 public:
  TwoComponentChain(std::vector<int> signs, double length, double beta, double unit, double scale,
                    SeededRng& rng);

  void sweep();
  double energy() const;
  double quarter_charge() const;
  PointChargeConfiguration snapshot(Provenance prov = {}) const;

  double length() const noexcept { return length_; }
  double& scale() noexcept { return scale_; }
  std::uint64_t accepted() const noexcept { return accepted_; }
  std::uint64_t proposed() const noexcept { return proposed_; }
  void reset_counters() noexcept { accepted_ = proposed_ = 0; }
  std::span<const double> positions() const noexcept { return x_; }

 private:
  SeededRng& rng_;
  std::vector<double> x_;
  std::vector<int> q_;
  double length_, beta_, unit_, scale_;
  std::uint64_t accepted_ = 0, proposed_ = 0;
};

using SnapshotSink = std::function<void(const PointChargeConfiguration&)>;

/// Runs burn-in (with proposal tuning toward 40% acceptance on its first
/// half, and an autocorrelation pilot at the frozen scale on its second half),
/// then sweeps - burn_in production sweeps emitting one snapshot every `thin`.
/// Snapshots go to `sink` when given, otherwise into the returned ensemble.
ContinuumEnsemble gen_jellium(const JelliumParams& params, SeededRng& rng, SnapshotSink sink = {});
ContinuumEnsemble gen_two_component(const TwoComponentParams& params, SeededRng& rng,
                                    SnapshotSink sink = {});

/// Periodic Coulomb Green's function (r^2/L - |r|)/2 with r reduced mod L.
double periodic_green(double r, double length);

/// Sorted-well energy on the open line, (rho/2) sum (x_(i) - (2i-1)/(2 rho))^2, i = 1..N.
double jellium_line_energy(std::span<const double> positions, double rho);
/// Ring form used by JelliumChain, positions in [0, L) in any order.
double jellium_ring_energy(std::span<const double> positions, double rho);
/// sum_{i<j} e^2 q_i q_j G(x_i - x_j) over a periodic configuration.
double two_component_energy(const PointChargeConfiguration& cfg);

// ---------------------------------------------------------------- lattice and spectra

struct ClusterChainParams {
  std::size_t n_sites = 16384;
  /// Cluster size is 2 * Geometric(p) on {1, 2, ...} with p = 2 / mean.
  double mean_cluster_size = 4.0;
};

/// Neutral-cluster chain: consecutive clusters of even size 2m, each a
/// uniformly random arrangement of m pluses and m minuses. The tiling starts
/// well to the left of site 0 at a random offset so the window sees an
/// (approximately) stationary renewal sequence. gamma = 1, e = 2, open.
LatticeChargeConfiguration gen_cluster_chain(const ClusterChainParams& params, SeededRng& rng);

/// Bulk of the Gaussian unitary ensemble via the Dumitriu-Edelman tridiagonal
/// model, unfolded with the semicircle law to unit density. Atoms are the
/// unfolded eigenvalues falling in [n/4, 3n/4), translated to the open window
/// [0, n/2).
PointChargeConfiguration gen_rmt_bulk(std::size_t n, SeededRng& rng);

/// Semicircle counting function N(x) for an n x n matrix with radius 2 sqrt(n).
double semicircle_count(double x, std::size_t n);

}  // namespace tightline
