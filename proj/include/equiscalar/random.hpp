#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace equiscalar {

/// Seeded random stream. Uniform and Gaussian draws are derived from the raw
/// 64-bit engine output by fixed formulas, so a seed reproduces the same
/// values bit for bit on every platform that provides std::mt19937_64.
class RngState {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/box-muller";

  explicit RngState(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::string algorithm() const { return kAlgorithm; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }
  bool coin() { return (engine_() >> 63) != 0; }

  /// Standard normal via Box-Muller; no cached second draw.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Independent child stream for trial `index`; depends only on the root seed.
  [[nodiscard]] RngState split(std::uint64_t index) const {
    return RngState(splitmix64(seed_ ^ splitmix64(index + 0x9E3779B97F4A7C15ULL)));
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace equiscalar
