#pragma once

#include <cstdint>

namespace ccpde {

/// Splittable 64-bit generator (splitmix64). Every random draw in the
/// library goes through this type so whole runs are a pure function of the
/// master seed, independent of platform and standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0,1), never exactly 0 or 1.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; one value per call, cached pair.
  double next_normal();

  /// Derive an independent stream (for partitioned parallel sampling).
  Rng split(std::uint64_t stream_id) const;

private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ccpde
