#pragma once

#include "twoscale/core_data.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace twoscale::synth {

enum class SignalKind { sine, ar1, gaussian_noise, lorenz_x };

std::string_view signal_kind_name(SignalKind kind) noexcept;
SignalKind parse_signal_kind(std::string_view text);

struct SignalSpec {
  SignalKind kind = SignalKind::sine;
  std::size_t n = 400;
  std::uint64_t seed = 0;
  // sine
  double amplitude = 1.0;
  double period = 40.0;
  double phase = 0.0;
  // ar1
  double phi = 0.0;
  // ar1 / gaussian_noise
  double sigma = 1.0;
  // lorenz_x
  double dt = 0.01;
  std::size_t discard = 1000;
};

// sine: A sin(2 pi (t mod p) / p + phase) for t = 0..n-1, so integer periods
// repeat bit-for-bit. ar1: v_t = phi v_{t-1} + e_t started from the
// stationary distribution. lorenz_x: x-component of a fixed-step RK4
// integration (sigma 10, rho 28, beta 8/3) after `discard` transient steps,
// from (1, 1, 1) plus a small seed-dependent offset.
// Throws InvalidSpec if n < 8 or a parameter is out of range.
std::vector<double> gen_signal(const SignalSpec& spec);

// Cholesky-based check; throws NotPositiveDefinite.
void require_spd(const Eigen::MatrixXd& matrix, std::string_view what);

// -P_ij / sqrt(P_ii P_jj) with zero diagonal.
Eigen::MatrixXd ground_truth_partial_correlation(const Eigen::MatrixXd& precision);

// N draws of a zero-mean Gaussian with covariance precision^-1, as an N x n
// matrix. Sampling factors the covariance, not the precision.
Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& precision, std::size_t n_samples,
                                std::uint64_t seed, std::uint64_t stream = 0);

// Subjects alternate by class (class0 first) and draw from per-subject
// streams of `seed`. Only `network` is populated; its roi_count must equal
// the precision dimension.
CohortDataset gen_cohort_from_precision(const Eigen::MatrixXd& precision_class0,
                                        const Eigen::MatrixXd& precision_class1,
                                        std::size_t subjects_per_class, std::size_t n_timepoints,
                                        std::uint64_t seed, Network network = Network::default_mode);

struct HubDesign {
  std::size_t hub = 0;               // hub ROI index
  std::size_t hub_degree = 10;       // hub joins ROIs 1..hub_degree (skipping the hub)
  double hub_partial = 0.3;          // ground-truth partial correlation on hub edges
  double chain_partial = 0.25;       // partial correlation between consecutive non-hub ROIs
};

struct PrecisionPair {
  Eigen::MatrixXd class0;
  Eigen::MatrixXd class1;
  double diagonal_loading = 0.0;  // added to class1's diagonal to restore definiteness
};

// Base precision: unit diagonal, a star around the hub and a chain over the
// ROIs the star does not touch. Class 1 scales the hub's off-diagonal
// entries by (1 - separation): 0 keeps the classes identical, 1 removes the
// hub edges. If the result is not positive definite the diagonal is loaded
// until it is, and the amount is reported.
PrecisionPair hub_precision_pair(std::size_t n, double separation, const HubDesign& design = {});

struct TwoClassOptions {
  double separation = 1.0;
  std::size_t subjects_per_class = 50;
  std::size_t n_timepoints = 190;
  std::uint64_t seed = 7;
  // Network that carries the class difference; all others share the base
  // structure in both classes.
  Network target = Network::default_mode;
  HubDesign hub;
};

struct TwoClassCohort {
  CohortDataset dataset;
  double diagonal_loading = 0.0;
  std::size_t hub = 0;
};

// All six networks per subject, each drawn from the hub design at its own
// ROI count.
TwoClassCohort gen_two_class_cohort(const TwoClassOptions& options);

}  // namespace twoscale::synth
