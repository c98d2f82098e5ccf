#include "twoscale/embedding.hpp"

#include "twoscale/error.hpp"
#include "twoscale/numeric.hpp"
#include "twoscale/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace twoscale::embedding {

void check_params(const EmbeddingParams& params, std::size_t n) {
  if (params.m < 1 || params.tau < 1) {
    throw Error(ErrorCode::InvalidParams, "embedding needs m >= 1 and tau >= 1");
  }
  if ((params.m - 1) * params.tau >= n || params.states(n) < 2) {
    throw Error(ErrorCode::InvalidParams,
                "embedding (m=" + std::to_string(params.m) + ", tau=" +
                    std::to_string(params.tau) + ") leaves fewer than 2 states for n=" +
                    std::to_string(n));
  }
}

StateMatrix embed_series(std::span<const double> series, const EmbeddingParams& params) {
  check_params(params, series.size());
  StateMatrix out;
  out.rows = params.states(series.size());
  out.cols = params.m;
  out.data.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.data[i * out.cols + j] = series[i + j * params.tau];
  }
  return out;
}

std::vector<double> reconstruct_series(const StateMatrix& states, std::size_t tau) {
  std::vector<double> out;
  if (states.rows == 0) return out;
  if (states.cols > 1 && states.rows < tau) {
    throw Error(ErrorCode::InvalidParams, "states with K < tau do not cover every sample");
  }
  for (std::size_t i = 0; i < states.rows; ++i) out.push_back(states(i, 0));
  // The last row covers samples K-1, K-1+tau, ...; fill the gaps from the
  // preceding rows' later columns.
  const std::size_t n = states.rows + (states.cols - 1) * tau;
  out.resize(n);
  for (std::size_t t = states.rows; t < n; ++t) {
    const std::size_t offset = t - (states.rows - 1);
    const std::size_t j = (offset + tau - 1) / tau;  // smallest column reaching t
    const std::size_t i = t - j * tau;
    out[t] = states(i, j);
  }
  return out;
}

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  const double mean = pairwise_mean(series);
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < n; ++t) centered[t] = series[t] - mean;
  std::vector<double> products(n);
  for (std::size_t t = 0; t < n; ++t) products[t] = centered[t] * centered[t];
  const double variance = pairwise_sum(products);
  std::vector<double> r(max_lag + 1, 0.0);
  if (variance <= 0.0) return r;
  r[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
    products.resize(n - k);
    for (std::size_t t = 0; t + k < n; ++t) products[t] = centered[t] * centered[t + k];
    r[k] = pairwise_sum(products) / variance;
  }
  return r;
}

DelayEstimate select_delay(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < 8) {
    throw Error(ErrorCode::SeriesTooShort,
                "delay selection needs at least 8 samples, got " + std::to_string(n));
  }
  if (max_lag < 1 || 2 * max_lag >= n) {
    throw Error(ErrorCode::InvalidParams,
                "max_lag must satisfy 1 <= max_lag < n/2 (max_lag=" + std::to_string(max_lag) +
                    ", n=" + std::to_string(n) + ")");
  }
  const bool constant = std::all_of(series.begin(), series.end(),
                                    [&](double v) { return v == series.front(); });
  if (constant) return {1, true, "default"};

  const auto r = autocorrelation(series, max_lag);
  const double cutoff = 1.0 / std::numbers::e;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    if (r[k] < cutoff) return {k, false, "1/e"};
  }
  for (std::size_t k = 1; k < max_lag; ++k) {
    if (r[k] < r[k - 1] && r[k] <= r[k + 1]) return {k, false, "first-minimum"};
  }
  return {1, false, "default"};
}

CaoCurve cao_curves(std::span<const double> series, std::size_t tau, std::size_t d_max) {
  const std::size_t n = series.size();
  if (d_max < 3) throw Error(ErrorCode::InvalidParams, "Cao curves need d_max >= 3");
  if (tau < 1) throw Error(ErrorCode::InvalidParams, "Cao curves need tau >= 1");
  if (d_max * tau >= n || n - d_max * tau < 2) {
    throw Error(ErrorCode::InvalidParams,
                "series of length " + std::to_string(n) + " is too short for d_max=" +
                    std::to_string(d_max) + ", tau=" + std::to_string(tau));
  }

  CaoCurve curve;
  curve.tau = tau;
  curve.d_max = d_max;
  for (std::size_t d = 1; d <= d_max; ++d) {
    // Reference points must also exist in dimension d + 1.
    const std::size_t count = n - d * tau;
    std::vector<double> ratio(count, 0.0);
    std::vector<double> step(count, 0.0);
    std::vector<char> has_coincident(count, 0);
    std::vector<char> valid(count, 0);

    parallel_for(count, [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = count;
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        double dist = 0.0;
        for (std::size_t c = 0; c < d && dist <= best; ++c) {
          dist = std::max(dist, std::abs(series[i + c * tau] - series[j + c * tau]));
        }
        if (dist == 0.0) {
          has_coincident[i] = 1;
          continue;
        }
        if (dist < best) {
          best = dist;
          best_j = j;
        }
      }
      if (best_j == count) return;
      const double next = std::abs(series[i + d * tau] - series[best_j + d * tau]);
      ratio[i] = std::max(best, next) / best;
      step[i] = next;
      valid[i] = 1;
    });

    std::vector<double> a;
    std::vector<double> s;
    std::size_t coincident = 0;
    for (std::size_t i = 0; i < count; ++i) {
      coincident += has_coincident[i] ? 1 : 0;
      if (!valid[i]) continue;
      a.push_back(ratio[i]);
      s.push_back(step[i]);
    }
    if (a.empty()) {
      throw Error(ErrorCode::DegenerateSeries,
                  "all states coincide in dimension " + std::to_string(d));
    }
    curve.e.push_back(pairwise_mean(a));
    curve.e_star.push_back(pairwise_mean(s));
    curve.coincident.push_back(coincident);
  }

  for (std::size_t d = 0; d + 1 < d_max; ++d) {
    curve.e1.push_back(curve.e[d + 1] / curve.e[d]);
    if (curve.e_star[d] == 0.0) {
      throw Error(ErrorCode::DegenerateSeries,
                  "nearest neighbours predict the next sample exactly in dimension " +
                      std::to_string(d + 1) + "; E2 undefined");
    }
    curve.e2.push_back(curve.e_star[d + 1] / curve.e_star[d]);
  }
  return curve;
}

DimensionChoice choose_dimension(std::span<const double> e1, std::size_t d_max, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidParams, "epsilon must be positive");
  // Walk back from the end while E1 stays inside the band.
  std::size_t first = e1.size();
  while (first > 0 && std::abs(e1[first - 1] - 1.0) < epsilon) --first;
  if (first == e1.size()) return {d_max, false};
  return {first + 1, true};
}

DimensionChoice choose_dimension(const CaoCurve& curve, double epsilon) {
  return choose_dimension(curve.e1, curve.d_max, epsilon);
}

EmbeddingResult embed_auto(std::span<const double> series, const EmbeddingSettings& settings) {
  const std::size_t n = series.size();
  EmbeddingResult result;
  std::size_t tau = settings.tau;
  if (tau == 0) {
    const std::size_t max_lag = std::min(settings.max_lag, (n - 1) / 2);
    const auto delay = select_delay(series, max_lag);
    tau = delay.tau;
    result.degenerate = delay.degenerate;
  }

  std::size_t m = 1;
  if (!result.degenerate) {
    // Shrink d_max if the series cannot support it.
    std::size_t d_max = settings.d_max;
    while (d_max >= 3 && (d_max * tau >= n || n - d_max * tau < 2)) --d_max;
    if (d_max < 3) {
      throw Error(ErrorCode::SeriesTooShort,
                  "series of length " + std::to_string(n) + " cannot support Cao curves with tau=" +
                      std::to_string(tau));
    }
    try {
      const auto choice = choose_dimension(cao_curves(series, tau, d_max), settings.epsilon);
      m = choice.m;
      result.saturated = choice.saturated;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateSeries) throw;
      result.degenerate = true;
    }
  }

  if (settings.force_k > 0) {
    if (settings.force_k > n) {
      throw Error(ErrorCode::InvalidParams, "force_k=" + std::to_string(settings.force_k) +
                                                " exceeds series length " + std::to_string(n));
    }
    while (m > 1 && n - (m - 1) * tau < settings.force_k) --m;
  }
  result.params = {m, tau};
  StateMatrix states = embed_series(series, result.params);
  if (settings.force_k > 0 && states.rows > settings.force_k) {
    states.rows = settings.force_k;
    states.data.resize(states.rows * states.cols);
  }
  result.k = states.rows;
  result.states = std::move(states);
  return result;
}

}  // namespace twoscale::embedding
