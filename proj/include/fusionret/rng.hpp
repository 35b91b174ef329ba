#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fusionret {

/// Seeded generator with portable derived distributions.
///
/// std::mt19937_64 output is fixed by the standard, but the library's
/// distributions are not, so uniform, integer and normal draws are derived
/// here to keep seeded outputs identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal via the polar Box-Muller method.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fusionret
