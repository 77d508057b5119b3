#include "tightline/rng.hpp"

#include <cmath>

#include "tightline/errors.hpp"

namespace tightline {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), engine_(make_engine(seed, stream_id)) {}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("SeededRng::below: n must be positive");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

double SeededRng::normal(double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(engine_);
}

std::uint64_t SeededRng::poisson(double mean) {
  if (!(mean >= 0.0)) throw ArgumentError("SeededRng::poisson: negative mean");
  if (mean == 0.0) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(engine_);
}

double SeededRng::chi(double dof) {
  if (!(dof > 0.0)) throw ArgumentError("SeededRng::chi: dof must be positive");
  return std::sqrt(std::chi_squared_distribution<double>(dof)(engine_));
}

std::uint64_t SeededRng::geometric_trials(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("SeededRng::geometric_trials: p outside (0, 1]");
  return std::geometric_distribution<std::uint64_t>(p)(engine_) + 1;
}

}  // namespace tightline
