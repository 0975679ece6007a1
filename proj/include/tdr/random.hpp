#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tdr {

/// Seeded random stream used by every stochastic routine.
///
/// Streams are derived from a 64-bit root seed and a path of integer labels
/// (for example `{tag, horizon, replication}`), so replications can run in any
/// order or concurrently and still draw identical numbers. All derived
/// quantities (uniforms, indices, Poisson counts) are computed from raw 64-bit
/// outputs with fixed arithmetic, which keeps results identical across
/// standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);
  RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  /// Poisson draw by inversion with a cumulative search.
  int poisson(double rate);

  /// Independent child stream seeded from this stream's next output.
  RandomStream split() { return RandomStream(next_u64(), {0x5eedULL}); }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to mix seeds and path labels.
std::uint64_t mix64(std::uint64_t x);

}  // namespace tdr
