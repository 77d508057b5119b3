#pragma once

#include <cstdint>
#include <random>

namespace tightline {

/// Reproducible random stream identified by (seed, stream_id).
///
/// The engine is std::mt19937_64 seeded through std::seed_seq from the four
/// 32-bit halves of seed and stream_id, so distinct streams of one seed are
/// independent for all practical purposes and a given pair always replays
/// the same sequence. Uniform variates are built directly from the top 53
/// engine bits; other distributions come from <random>, whose algorithms are
/// fixed per standard library, so results are bit-identical on one platform.
class SeededRng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double sd = 1.0);
  std::uint64_t poisson(double mean);
  /// Chi-distributed variate with `dof` degrees of freedom.
  double chi(double dof);
  /// Number of trials up to and including the first success, support {1, 2, ...}.
  std::uint64_t geometric_trials(double success_probability);

  // UniformRandomBitGenerator interface, for std::shuffle and friends.
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Stream id for replica `replica` of model `model` within one experiment.
constexpr std::uint64_t derive_stream(std::uint64_t model, std::uint64_t replica) noexcept {
  return (model << 32) | (replica & 0xffffffffULL);
}

}  // namespace tightline
