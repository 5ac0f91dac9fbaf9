#pragma once

#include <cstdint>

#include "lamina/matrix.hpp"

namespace lamina {

// The one PRNG used anywhere in the project: splitmix64
// (Steele, Lea, Flood 2014). state' = state + 0x9E3779B97F4A7C15; the output
// is a bijective mix of state'. Identical streams on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform in [-1, 1).
  double symmetric() { return 2.0 * uniform01() - 1.0; }

 private:
  std::uint64_t state_;
};

inline Mat random_matrix(SplitMix64& rng, int d, double scale = 1.0) {
  Mat m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = scale * rng.symmetric();
  return m;
}

// Random matrix with strictly negative determinant, bounded away from the
// singular set so tolerance classification stays unambiguous.
inline Mat random_negative_det_matrix(SplitMix64& rng, int d,
                                      double scale = 1.0) {
  for (;;) {
    Mat m = random_matrix(rng, d, scale);
    double det = determinant(m);
    if (det > 0.0) {
      for (int j = 0; j < d; ++j) {
        double t = m(0, j);
        m(0, j) = m(1, j);
        m(1, j) = t;
      }
      det = -det;
    }
    double floor = 1e-3;
    for (int i = 1; i < d; ++i) floor *= scale;
    if (det < -floor) return m;
  }
}

}  // namespace lamina
