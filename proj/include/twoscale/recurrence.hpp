#pragma once

#include "twoscale/embedding.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace twoscale::recurrence {

// Dense square matrix, row-major.
struct SquareMatrix {
  std::size_t size = 0;
  std::vector<double> data;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : size(n), data(n * n, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * size + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * size + j]; }
};

// Pairwise Euclidean distances between state vectors. Each unordered pair is
// computed once and mirrored, so the result is exactly symmetric with a zero
// diagonal.
SquareMatrix recurrence_matrix(const embedding::StateMatrix& states);

struct BinaryRecurrence {
  std::size_t size = 0;
  std::vector<char> bits;
  double epsilon = 0.0;  // distance cutoff actually applied

  bool operator()(std::size_t i, std::size_t j) const { return bits[i * size + j] != 0; }
};

struct ThresholdRule {
  enum class Kind { fixed_distance, target_rate };
  Kind kind = Kind::target_rate;
  double value = 0.1;

  static ThresholdRule fixed(double epsilon) { return {Kind::fixed_distance, epsilon}; }
  static ThresholdRule rate(double rho) { return {Kind::target_rate, rho}; }
};

// bits(i,j) = distance(i,j) <= epsilon. For a target rate rho, epsilon is the
// rho-quantile of the off-diagonal distances (the ceil(rho*M)-th smallest of
// the M upper-triangle values). Throws InvalidRate unless 0 < rho < 1.
BinaryRecurrence threshold(const SquareMatrix& distances, const ThresholdRule& rule);

// Off-diagonal recurrence rate.
double recurrence_rate(const BinaryRecurrence& br);

struct RqaFeatures {
  double rr = 0.0;
  double det = 0.0;
  double l_mean = 0.0;
  double l_max = 0.0;
  double lam = 0.0;
  double tt = 0.0;
  double entr = 0.0;
  bool no_recurrences = false;
};

// Histogram length -> count of diagonal lines in the upper triangle (the
// main diagonal is excluded). The lower triangle mirrors it.
std::map<std::size_t, std::size_t> diagonal_lines(const BinaryRecurrence& br);

// Histogram of vertical runs over all columns, with the main diagonal
// treated as non-recurrent.
std::map<std::size_t, std::size_t> vertical_lines(const BinaryRecurrence& br);

// Standard line-based measures. ENTR uses natural logarithms over lines of
// length >= l_min. If no off-diagonal point recurs, every line measure is 0
// and no_recurrences is set.
RqaFeatures rqa_measures(const BinaryRecurrence& br, std::size_t l_min = 2, std::size_t v_min = 2);

// Corner-aligned bilinear resampling to size x size. Only the upper
// triangle is interpolated and then mirrored, so symmetric inputs stay
// exactly symmetric.
SquareMatrix resize_bilinear(const SquareMatrix& matrix, std::size_t size = 224);

// Min-max scaled 8-bit values, row 0 first. A constant matrix maps to 0.
std::vector<unsigned char> to_grayscale(const SquareMatrix& matrix);

// Binary PGM (P5). Row 0 of the matrix is the top row of the image.
void render_grayscale(const SquareMatrix& matrix, const std::filesystem::path& path);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned max_value = 0;
  std::vector<unsigned char> pixels;
};

PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace twoscale::recurrence
