#pragma once

#include <cstdint>

namespace rdist {

/// SplitMix64 finalizer; a bijective 64-bit mixing function.
std::uint64_t mix64(std::uint64_t x);

/// Seed for one item of a seeded collection: depends only on (seed, index).
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index);

/// Counter-based generator: the n-th draw is mix64(seed + n * golden). The
/// stream is fully described by (seed, counter), which makes it trivially
/// reproducible regardless of which thread consumes it.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace rdist
