#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace twoscale::embedding {

struct EmbeddingParams {
  std::size_t m = 1;    // embedding dimension
  std::size_t tau = 1;  // delay in samples

  // Number of state vectors for a series of length n.
  std::size_t states(std::size_t n) const { return n - (m - 1) * tau; }
};

// Throws Error(InvalidParams) unless m, tau >= 1 and at least 2 states fit.
void check_params(const EmbeddingParams& params, std::size_t n);

// K x M row-major state matrix; row i is (v[i], v[i+tau], ..., v[i+(M-1)tau]).
struct StateMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }
};

StateMatrix embed_series(std::span<const double> series, const EmbeddingParams& params);

// Inverse of embed_series: column 0 of every row followed by the tail of the
// last row. Requires K >= tau when M > 1.
std::vector<double> reconstruct_series(const StateMatrix& states, std::size_t tau);

struct DelayEstimate {
  std::size_t tau = 1;
  bool degenerate = false;  // constant series, tau defaulted to 1
  std::string rule;         // "1/e", "first-minimum", "default"
};

// Sample autocorrelation r(k) for k = 0..max_lag (biased estimator).
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

// First lag whose autocorrelation drops below 1/e; else the first local
// minimum; else 1. Throws SeriesTooShort if n < 8 and InvalidParams unless
// 1 <= max_lag < n/2.
DelayEstimate select_delay(std::span<const double> series, std::size_t max_lag);

struct CaoCurve {
  std::size_t tau = 1;
  std::size_t d_max = 0;
  std::vector<double> e;      // E(d), d = 1..d_max
  std::vector<double> e_star; // E*(d), d = 1..d_max
  std::vector<double> e1;     // E1(d) = E(d+1)/E(d), d = 1..d_max-1
  std::vector<double> e2;     // E2(d) = E*(d+1)/E*(d), d = 1..d_max-1
  // Per dimension, the number of reference points that had at least one
  // exactly coincident state; those pairs were skipped in the neighbour search.
  std::vector<std::size_t> coincident;
};

// Cao's E1/E2 statistics with Chebyshev distances. Neighbours at distance
// exactly zero are skipped; ties go to the lowest index. Throws
// InvalidParams if d_max < 3 or fewer than 2 states exist in dimension
// d_max + 1, and DegenerateSeries if some dimension has no usable point.
CaoCurve cao_curves(std::span<const double> series, std::size_t tau, std::size_t d_max);

struct DimensionChoice {
  std::size_t m = 1;
  bool saturated = false;
};

// Smallest d such that |E1(d') - 1| < epsilon for every d' >= d. Falls back
// to d_max with saturated = false.
DimensionChoice choose_dimension(const CaoCurve& curve, double epsilon = 0.05);
DimensionChoice choose_dimension(std::span<const double> e1, std::size_t d_max,
                                 double epsilon = 0.05);

struct EmbeddingSettings {
  std::size_t tau = 0;           // 0 selects automatically
  std::size_t max_lag = 20;      // clipped to (n - 1) / 2
  std::size_t d_max = 10;
  double epsilon = 0.05;
  std::size_t force_k = 0;       // 0 leaves K = n - (m-1)tau
};

struct EmbeddingResult {
  EmbeddingParams params;
  std::size_t k = 0;             // states actually used
  bool saturated = false;
  bool degenerate = false;
  StateMatrix states;
};

// Delay selection, Cao dimension choice and embedding for one series.
// With force_k the dimension is lowered until at least force_k states fit and
// only the first force_k states are kept. A constant series embeds with
// m = 1 and is marked degenerate.
EmbeddingResult embed_auto(std::span<const double> series, const EmbeddingSettings& settings);

}  // namespace twoscale::embedding
