#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They favour obviousness over speed and share no code with the
// library beyond plain data types.

#include "twoscale/recurrence.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

struct Cao {
  std::vector<double> e, e_star, e1, e2;
};

// Exhaustive Chebyshev scan over every candidate, with long double means.
// Zero-distance candidates are ignored; ties keep the lowest index.
inline Cao cao(std::span<const double> x, std::size_t tau, std::size_t d_max) {
  Cao out;
  const std::size_t n = x.size();
  for (std::size_t d = 1; d <= d_max; ++d) {
    const std::size_t count = n - d * tau;
    long double sum_a = 0, sum_star = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best = count;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        double dist = 0;
        for (std::size_t c = 0; c < d; ++c) dist = std::max(dist, std::abs(x[i + c * tau] - x[j + c * tau]));
        if (dist == 0) continue;
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
      if (best == count) continue;
      const double extra = std::abs(x[i + d * tau] - x[best + d * tau]);
      sum_a += std::max(best_dist, extra) / best_dist;
      sum_star += extra;
      ++used;
    }
    out.e.push_back(static_cast<double>(sum_a / used));
    out.e_star.push_back(static_cast<double>(sum_star / used));
  }
  for (std::size_t d = 0; d + 1 < d_max; ++d) {
    out.e1.push_back(out.e[d + 1] / out.e[d]);
    out.e2.push_back(out.e_star[d + 1] / out.e_star[d]);
  }
  return out;
}

struct LineCounts {
  std::size_t points = 0;       // recurrent points belonging to any line
  std::size_t long_points = 0;  // points on lines of length >= min
};

// Every maximal diagonal run above the main diagonal, found by locating its
// start cell and walking it.
inline LineCounts diagonal_runs(const twoscale::recurrence::BinaryRecurrence& br, std::size_t l_min) {
  LineCounts c;
  const std::size_t k = br.size;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (!br(i, j)) continue;
      const bool starts = i == 0 || !br(i - 1, j - 1);
      if (!starts) continue;
      std::size_t len = 0;
      while (i + len < k && j + len < k && br(i + len, j + len)) ++len;
      c.points += len;
      if (len >= l_min) c.long_points += len;
    }
  }
  return c;
}

// Every maximal vertical run, the main diagonal counted as a gap.
inline LineCounts vertical_runs(const twoscale::recurrence::BinaryRecurrence& br, std::size_t v_min) {
  LineCounts c;
  const std::size_t k = br.size;
  auto on = [&](std::size_t i, std::size_t j) { return i != j && br(i, j); };
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!on(i, j) || (i > 0 && on(i - 1, j))) continue;
      std::size_t len = 0;
      while (i + len < k && on(i + len, j)) ++len;
      c.points += len;
      if (len >= v_min) c.long_points += len;
    }
  }
  return c;
}

// Partial correlation of columns a and b given all others: correlation of the
// least-squares residuals (with intercept), solved by Householder QR.
inline double residual_partial_correlation(const Eigen::MatrixXd& data, Eigen::Index a, Eigen::Index b) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  Eigen::MatrixXd design(n, p - 1);
  design.col(0).setOnes();
  Eigen::Index col = 1;
  for (Eigen::Index c = 0; c < p; ++c) {
    if (c != a && c != b) design.col(col++) = data.col(c);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd ra = data.col(a) - design * qr.solve(data.col(a));
  const Eigen::VectorXd rb = data.col(b) - design * qr.solve(data.col(b));
  return ra.dot(rb) / std::sqrt(ra.squaredNorm() * rb.squaredNorm());
}

// Two-pass unbiased covariance.
inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (Eigen::Index r = 0; r < n; ++r) mean += data.row(r).transpose();
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd d = data.row(r).transpose() - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(n - 1);
}

// Exact fraction with a positive denominator.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  Fraction(std::int64_t n = 0, std::int64_t d = 1) : num(n), den(d) {
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  friend Fraction operator+(Fraction x, Fraction y) { return {x.num * y.den + y.num * x.den, x.den * y.den}; }
  friend Fraction operator*(Fraction x, Fraction y) { return {x.num * y.num, x.den * y.den}; }
  friend bool operator<(Fraction x, Fraction y) { return x.num * y.den < y.num * x.den; }
};

inline Fraction gini(std::size_t zeros, std::size_t ones) {
  const auto n = static_cast<std::int64_t>(zeros + ones);
  const auto z = static_cast<std::int64_t>(zeros);
  const auto o = static_cast<std::int64_t>(ones);
  return {n * n - z * z - o * o, n * n};
}

struct GiniSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0;
};

// Try every feature and every midpoint between distinct values, partition
// the samples explicitly and compare weighted child impurities exactly.
inline GiniSplit exhaustive_split(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                  std::size_t min_leaf) {
  GiniSplit best;
  Fraction best_impurity;
  const std::size_t n = rows.size();
  if (n < 2) return best;
  for (std::size_t f = 0; f < rows[0].size(); ++f) {
    std::vector<double> values;
    for (const auto& r : rows) values.push_back(r[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double t = values[v] + (values[v + 1] - values[v]) / 2.0;
      std::size_t l[2] = {0, 0}, r[2] = {0, 0};
      for (std::size_t s = 0; s < n; ++s) (rows[s][f] <= t ? l : r)[labels[s]]++;
      const std::size_t nl = l[0] + l[1], nr = r[0] + r[1];
      if (nl < min_leaf || nr < min_leaf) continue;
      const auto total = static_cast<std::int64_t>(n);
      const Fraction impurity = Fraction(static_cast<std::int64_t>(nl), total) * gini(l[0], l[1]) +
                                Fraction(static_cast<std::int64_t>(nr), total) * gini(r[0], r[1]);
      if (!best.found || impurity < best_impurity) {
        best = {true, f, t};
        best_impurity = impurity;
      }
    }
  }
  return best;
}

}  // namespace oracle
