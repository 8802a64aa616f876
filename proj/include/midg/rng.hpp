// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace midg {

/// Sequential generator used for parameter initialization, shuffling and data synthesis.
/// Distributions are computed from raw engine output so streams are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stateless counter-based generator: the value at (stream, index) depends only on the seed
/// and the two counters. Each stochastic op in a forward pass claims a fresh stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t first_stream = 0)
      : seed_(seed), stream_(first_stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t claim_stream() { return stream_++; }

  double uniform(std::uint64_t stream, std::uint64_t index) const;
  double normal(std::uint64_t stream, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace midg
