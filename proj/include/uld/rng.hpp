#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace uld {

// Thin wrapper over mt19937_64. The engine's output sequence is fixed by the
// standard, and the conversions below are ours, so draws are identical across
// standard library implementations (std::uniform_*_distribution are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uld
