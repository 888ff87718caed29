#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace switchlq {

/// Deterministic random stream used throughout the simulator.
///
/// Every Monte-Carlo path owns an independent stream seeded with
/// (base_seed ^ path_index), so results are reproducible for a fixed seed and
/// independent of how paths are scheduled across worker threads. The normal
/// and exponential transforms are implemented here (rather than through
/// std::*_distribution) so the produced sequences are pinned by this library,
/// not by the standard-library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_path(std::uint64_t base_seed, std::uint64_t path_index) {
    return Rng(base_seed ^ path_index);
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw (Box-Muller, pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Exponential draw with the given rate (mean 1/rate).
  double exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace switchlq
