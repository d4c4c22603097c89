#pragma once

#include <cstdint>
#include <random>

namespace rpg {

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the stream identified by (seed, a, b), e.g. (seed, cell, repetition).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Portable random source: std::mt19937_64 (whose output sequence is fixed by
/// the standard) with uniforms built from the top 53 bits and normals from the
/// Marsaglia polar method. std::normal_distribution is avoided because its
/// algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rpg
