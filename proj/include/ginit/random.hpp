#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ginit/types.hpp"

namespace ginit {

/// Seedable Gaussian source: mt19937_64 uniforms fed through the polar
/// Box-Muller transform, so the draw sequence is fully determined by the seed.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double sample() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Vec3 vec3(double sigma) {
    return Vec3(sigma * sample(), sigma * sample(), sigma * sample());
  }

 private:
  double uniform() {
    // 53-bit mantissa uniform in (0, 1)
    return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ginit
