#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace gadm {

/// Mixes a master seed with up to two stream coordinates (e.g. generation and
/// individual index) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Seeded source of the random draws used throughout the toolkit. Every draw
/// is a deterministic function of the seed and the call sequence.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() noexcept;
  double std_normal();
  /// Uniform integer on [0, n). n must be > 0.
  std::size_t index(std::size_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  double beta(double a, double b);

  // UniformRandomBitGenerator interface, so the stream can drive std algorithms.
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gadm
