#include "twoscale/synth.hpp"

#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"
#include "twoscale/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace twoscale::synth {

std::string_view signal_kind_name(SignalKind kind) noexcept {
  switch (kind) {
    case SignalKind::sine: return "sine";
    case SignalKind::ar1: return "ar1";
    case SignalKind::gaussian_noise: return "gaussian_noise";
    case SignalKind::lorenz_x: return "lorenz_x";
  }
  return "unknown";
}

SignalKind parse_signal_kind(std::string_view text) {
  for (SignalKind k : {SignalKind::sine, SignalKind::ar1, SignalKind::gaussian_noise, SignalKind::lorenz_x}) {
    if (signal_kind_name(k) == text) return k;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown signal kind '" + std::string(text) + "'");
}

namespace {

using State = std::array<double, 3>;

State lorenz_rate(const State& s) {
  constexpr double sigma = 10.0;
  constexpr double rho = 28.0;
  constexpr double beta = 8.0 / 3.0;
  return {sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]};
}

State axpy(const State& s, double h, const State& k) {
  return {s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]};
}

State rk4_step(const State& s, double dt) {
  const State k1 = lorenz_rate(s);
  const State k2 = lorenz_rate(axpy(s, dt / 2.0, k1));
  const State k3 = lorenz_rate(axpy(s, dt / 2.0, k2));
  const State k4 = lorenz_rate(axpy(s, dt, k3));
  State next;
  for (int i = 0; i < 3; ++i) next[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return next;
}

}  // namespace

std::vector<double> gen_signal(const SignalSpec& spec) {
  if (spec.n < 8) throw Error(ErrorCode::InvalidSpec, "signals need n >= 8");
  std::vector<double> v(spec.n);
  Rng rng(spec.seed);
  switch (spec.kind) {
    case SignalKind::sine: {
      if (!(spec.period > 0.0)) throw Error(ErrorCode::InvalidSpec, "sine period must be positive");
      for (std::size_t t = 0; t < spec.n; ++t) {
        const double cycle = std::fmod(static_cast<double>(t), spec.period);
        v[t] = spec.amplitude * std::sin(2.0 * std::numbers::pi * cycle / spec.period + spec.phase);
      }
      break;
    }
    case SignalKind::ar1: {
      if (!(std::abs(spec.phi) < 1.0)) throw Error(ErrorCode::InvalidSpec, "ar1 needs |phi| < 1");
      if (!(spec.sigma > 0.0)) throw Error(ErrorCode::InvalidSpec, "ar1 needs sigma > 0");
      v[0] = spec.sigma / std::sqrt(1.0 - spec.phi * spec.phi) * rng.normal();
      for (std::size_t t = 1; t < spec.n; ++t) v[t] = spec.phi * v[t - 1] + spec.sigma * rng.normal();
      break;
    }
    case SignalKind::gaussian_noise: {
      if (!(spec.sigma > 0.0)) throw Error(ErrorCode::InvalidSpec, "noise needs sigma > 0");
      for (auto& x : v) x = spec.sigma * rng.normal();
      break;
    }
    case SignalKind::lorenz_x: {
      if (!(spec.dt > 0.0 && spec.dt <= 0.05)) throw Error(ErrorCode::InvalidSpec, "lorenz dt must lie in (0, 0.05]");
      State s{1.0 + 1e-3 * rng.normal(), 1.0 + 1e-3 * rng.normal(), 1.0 + 1e-3 * rng.normal()};
      for (std::size_t k = 0; k < spec.discard; ++k) s = rk4_step(s, spec.dt);
      for (std::size_t t = 0; t < spec.n; ++t) {
        s = rk4_step(s, spec.dt);
        v[t] = s[0];
      }
      break;
    }
  }
  return v;
}

void require_spd(const Eigen::MatrixXd& matrix, std::string_view what) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw Error(ErrorCode::NotPositiveDefinite, std::string(what) + " must be square and non-empty");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::NotPositiveDefinite, std::string(what) + " is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, std::string(what) + " is not positive definite");
  }
}

Eigen::MatrixXd ground_truth_partial_correlation(const Eigen::MatrixXd& precision) {
  const Eigen::Index n = precision.rows();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) rho(i, j) = -precision(i, j) / std::sqrt(precision(i, i) * precision(j, j));
    }
  }
  return rho;
}

Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& precision, std::size_t n_samples,
                                std::uint64_t seed, std::uint64_t stream) {
  require_spd(precision, "precision matrix");
  const Eigen::Index n = precision.rows();
  Eigen::MatrixXd cov = precision.llt().solve(Eigen::MatrixXd::Identity(n, n));
  cov = 0.5 * (cov + cov.transpose()).eval();
  const Eigen::MatrixXd lower = cov.llt().matrixL();
  Rng rng(seed, stream);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n_samples), n);
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    for (Eigen::Index j = 0; j < n; ++j) z(t, j) = rng.normal();
  }
  return z * lower.transpose();
}

namespace {

std::vector<RoiTimeSeries> to_rois(const Eigen::MatrixXd& samples, Network network) {
  std::vector<RoiTimeSeries> rois(static_cast<std::size_t>(samples.cols()));
  for (std::size_t r = 0; r < rois.size(); ++r) {
    rois[r].roi_id = r;
    rois[r].roi_label = default_roi_label(network, r);
    rois[r].network = network;
    rois[r].values.resize(static_cast<std::size_t>(samples.rows()));
    for (std::size_t t = 0; t < rois[r].values.size(); ++t) {
      rois[r].values[t] = samples(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r));
    }
  }
  return rois;
}

std::string subject_name(std::size_t index) {
  std::string digits = std::to_string(index + 1);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return "sub-" + digits;
}

}  // namespace

CohortDataset gen_cohort_from_precision(const Eigen::MatrixXd& precision_class0,
                                        const Eigen::MatrixXd& precision_class1,
                                        std::size_t subjects_per_class, std::size_t n_timepoints,
                                        std::uint64_t seed, Network network) {
  require_spd(precision_class0, "class0 precision");
  require_spd(precision_class1, "class1 precision");
  if (precision_class0.rows() != precision_class1.rows()) {
    throw Error(ErrorCode::InvalidSpec, "class precision matrices differ in size");
  }
  if (static_cast<std::size_t>(precision_class0.rows()) != roi_count(network)) {
    throw Error(ErrorCode::InvalidSpec, "precision size does not match the ROI count of " +
                                            std::string(network_name(network)));
  }
  if (n_timepoints < 8) throw Error(ErrorCode::InvalidSpec, "cohorts need N >= 8");
  CohortDataset dataset;
  dataset.n_timepoints = n_timepoints;
  dataset.subjects.resize(2 * subjects_per_class);
  parallel_for(dataset.subjects.size(), [&](std::size_t s) {
    Subject& subject = dataset.subjects[s];
    subject.subject_id = subject_name(s);
    subject.label = s % 2 == 0 ? Label::class0 : Label::class1;
    const auto& precision = subject.label == Label::class0 ? precision_class0 : precision_class1;
    subject.networks[network] = to_rois(sample_gaussian(precision, n_timepoints, seed, s), network);
  });
  return dataset;
}

PrecisionPair hub_precision_pair(std::size_t n, double separation, const HubDesign& design) {
  if (!(separation >= 0.0)) throw Error(ErrorCode::InvalidSpec, "separation must be >= 0");
  if (n < 3 || design.hub >= n) throw Error(ErrorCode::InvalidSpec, "hub design does not fit the ROI count");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd base = Eigen::MatrixXd::Identity(N, N);
  std::vector<bool> in_star(n, false);
  in_star[design.hub] = true;
  std::size_t added = 0;
  for (std::size_t j = 0; j < n && added < design.hub_degree; ++j) {
    if (j == design.hub) continue;
    base(static_cast<Eigen::Index>(design.hub), static_cast<Eigen::Index>(j)) = -design.hub_partial;
    base(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(design.hub)) = -design.hub_partial;
    in_star[j] = true;
    ++added;
  }
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < n; ++j) {
    if (!in_star[j]) rest.push_back(j);
  }
  for (std::size_t k = 1; k < rest.size(); ++k) {
    const auto a = static_cast<Eigen::Index>(rest[k - 1]);
    const auto b = static_cast<Eigen::Index>(rest[k]);
    base(a, b) = -design.chain_partial;
    base(b, a) = -design.chain_partial;
  }
  require_spd(base, "hub base precision");

  PrecisionPair pair;
  pair.class0 = base;
  pair.class1 = base;
  const auto h = static_cast<Eigen::Index>(design.hub);
  for (Eigen::Index j = 0; j < N; ++j) {
    if (j == h) continue;
    pair.class1(h, j) *= 1.0 - separation;
    pair.class1(j, h) *= 1.0 - separation;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(pair.class1);
  while (llt.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pair.class1);
    const double shift = 1e-3 - eig.eigenvalues().minCoeff();
    pair.class1.diagonal().array() += shift;
    pair.diagonal_loading += shift;
    llt.compute(pair.class1);
  }
  return pair;
}

TwoClassCohort gen_two_class_cohort(const TwoClassOptions& options) {
  if (options.subjects_per_class < 1) throw Error(ErrorCode::InvalidSpec, "need at least one subject per class");
  if (options.n_timepoints < 8) throw Error(ErrorCode::InvalidSpec, "cohorts need N >= 8");

  struct NetworkDesign {
    Network network;
    PrecisionPair pair;
  };
  std::vector<NetworkDesign> designs;
  TwoClassCohort out;
  out.hub = options.hub.hub;
  for (Network net : kAllNetworks) {
    const double sep = net == options.target ? options.separation : 0.0;
    HubDesign design = options.hub;
    design.hub_degree = std::min(design.hub_degree, roi_count(net) - 2);
    auto pair = hub_precision_pair(roi_count(net), sep, design);
    if (net == options.target) out.diagonal_loading = pair.diagonal_loading;
    designs.push_back({net, std::move(pair)});
  }

  auto& dataset = out.dataset;
  dataset.n_timepoints = options.n_timepoints;
  dataset.subjects.resize(2 * options.subjects_per_class);
  parallel_for(dataset.subjects.size(), [&](std::size_t s) {
    Subject& subject = dataset.subjects[s];
    subject.subject_id = subject_name(s);
    subject.label = s % 2 == 0 ? Label::class0 : Label::class1;
    for (std::size_t d = 0; d < designs.size(); ++d) {
      const auto& pair = designs[d].pair;
      const auto& precision = subject.label == Label::class0 ? pair.class0 : pair.class1;
      const std::uint64_t stream = s * kAllNetworks.size() + d;
      subject.networks[designs[d].network] =
          to_rois(sample_gaussian(precision, options.n_timepoints, options.seed, stream), designs[d].network);
    }
  });
  return out;
}

}  // namespace twoscale::synth
