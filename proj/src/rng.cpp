#include "ccpde/rng.hpp"

#include <cmath>

namespace ccpde {

double Rng::next_normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * 3.14159265358979323846 * u2;
  cached_ = r * std::sin(a);
  have_cached_ = true;
  return r * std::cos(a);
}

Rng Rng::split(std::uint64_t stream_id) const {
  // Feed the stream id through a copy of the generator so streams with
  // nearby ids decorrelate.
  Rng seeder(state_ ^ (0x5851f42d4c957f2dULL * (stream_id + 1)));
  return Rng(seeder.next_u64());
}

}  // namespace ccpde
