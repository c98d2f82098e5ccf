#pragma once

#include "twoscale/core_data.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace twoscale::connectivity {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Columns of one subject's network as an N x n matrix.
Matrix series_matrix(const std::vector<RoiTimeSeries>& rois);

// Unbiased covariance of the column-centred data. Requires N >= 2.
Matrix sample_covariance(const Matrix& data);

// Inverse of (1 - lambda) * cov + lambda * diag(cov) through a Cholesky
// factorization. Throws SingularCovariance (with the smallest LDL^T pivot in
// the message) if the regularized matrix is not positive definite.
Matrix precision_matrix(const Matrix& cov, double shrinkage);

// rho_ij = -P_ij / sqrt(P_ii P_jj) off the diagonal, 0 on it.
// Throws NonPositiveDiagonal if any P_ii <= 0.
Matrix partial_correlation(const Matrix& precision);

struct BrainGraph {
  Network network = Network::default_mode;
  Matrix adjacency;
  std::vector<std::string> roi_labels;
  // ROI indices whose variance was zero and had to be stabilized.
  std::vector<std::size_t> stabilized_rois;
};

struct GraphOptions {
  double shrinkage = 0.1;
  // Compare against marginal (Pearson) correlation instead of partial.
  bool marginal = false;
};

BrainGraph build_graph(const Subject& subject, Network network, const GraphOptions& options = {});

struct EigenFeatures {
  Vector eigenvalues;     // descending
  Vector leading_vector;  // unit length, largest-magnitude entry positive
  Matrix vectors;         // columns match eigenvalues
};

// Full symmetric eigendecomposition. Throws ConvergenceFailure if the solver
// does not converge. When the largest eigenvalue is repeated, the leading
// vector is the normalized projection of the standard basis vector that lies
// closest to the eigenspace, so a zero adjacency yields e_1.
EigenFeatures eigen_features(const Matrix& adjacency);

// Flips v so that its largest-magnitude entry (lowest index on ties) is
// positive.
void fix_sign(Vector& v);

struct DegreeOptions {
  double threshold = 0.2;
  // Count only positive partial correlations above the threshold.
  bool signed_edges = false;
};

struct RoiRanking {
  std::vector<std::size_t> degree;  // per ROI
  std::vector<std::size_t> order;   // ROI indices, highest degree first
};

// Edge (i, j) exists iff |rho_ij| > t (rho_ij > t when signed). Ties in
// degree are broken by ascending ROI index.
RoiRanking degree_and_rank(const Matrix& adjacency, const DegreeOptions& options = {});

struct FrequencyRow {
  std::size_t roi = 0;
  std::string roi_label;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct FrequencyTable {
  Label label = Label::class0;
  std::size_t class_size = 0;
  std::vector<FrequencyRow> rows;  // count descending, then ROI index
};

// For each class, how many subjects have each ROI among their top-k ROIs.
// `labels` runs parallel to `rankings`. Throws InvalidArgument if k exceeds
// the ROI count.
std::vector<FrequencyTable> top_roi_frequency(const std::vector<RoiRanking>& rankings,
                                              const std::vector<Label>& labels,
                                              const std::vector<std::string>& roi_labels,
                                              std::size_t k = 10);

}  // namespace twoscale::connectivity
