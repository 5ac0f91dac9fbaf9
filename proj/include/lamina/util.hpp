#pragma once

#include <charconv>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace lamina {

// Pairwise (tree) summation: deterministic for a fixed input order and with
// O(log n) rounding growth, which the repair pipelines rely on when comparing
// field-level and measure-level energies.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& xs) {
  return pairwise_sum(std::span<const double>(xs));
}

// Shortest decimal string that round-trips to the same IEEE-754 double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace lamina
