#pragma once

#include <cstddef>
#include <span>

namespace twoscale {

// Pairwise (cascade) summation. The result depends only on the input order,
// and the rounding error grows like O(log n) rather than O(n).
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_mean(std::span<const double> values) {
  return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace twoscale
