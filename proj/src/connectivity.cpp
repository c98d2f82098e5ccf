#include "twoscale/connectivity.hpp"

#include "twoscale/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace twoscale::connectivity {

Matrix series_matrix(const std::vector<RoiTimeSeries>& rois) {
  if (rois.empty()) return {};
  const std::size_t n = rois.front().values.size();
  Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rois.size()));
  for (std::size_t r = 0; r < rois.size(); ++r) {
    if (rois[r].values.size() != n) throw Error(ErrorCode::LengthMismatch, "ROI series differ in length");
    for (std::size_t t = 0; t < n; ++t) data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r)) = rois[r].values[t];
  }
  return data;
}

Matrix sample_covariance(const Matrix& data) {
  if (data.rows() < 2) throw Error(ErrorCode::InvalidArgument, "covariance needs at least 2 samples");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
  // Mirror so the result is exactly symmetric.
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < cov.cols(); ++j) cov(j, i) = cov(i, j);
  }
  return cov;
}

Matrix precision_matrix(const Matrix& cov, double shrinkage) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::InvalidArgument, "covariance must be square");
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "shrinkage must lie in [0, 1)");
  }
  Matrix reg = (1.0 - shrinkage) * cov;
  reg.diagonal() = cov.diagonal();
  Eigen::LLT<Matrix> llt(reg);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<Matrix> ldlt(reg);
    std::ostringstream msg;
    msg << "regularized covariance is not positive definite (smallest pivot "
        << ldlt.vectorD().minCoeff() << "); increase shrinkage";
    throw Error(ErrorCode::SingularCovariance, msg.str());
  }
  Matrix precision = llt.solve(Matrix::Identity(cov.rows(), cov.cols()));
  for (Eigen::Index i = 0; i < precision.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < precision.cols(); ++j) {
      const double avg = 0.5 * (precision(i, j) + precision(j, i));
      precision(i, j) = avg;
      precision(j, i) = avg;
    }
  }
  return precision;
}

Matrix partial_correlation(const Matrix& precision) {
  const Eigen::Index n = precision.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(precision(i, i) > 0.0)) {
      throw Error(ErrorCode::NonPositiveDiagonal,
                  "precision diagonal entry " + std::to_string(i) + " is not positive");
    }
  }
  Matrix rho = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double value = -precision(i, j) / std::sqrt(precision(i, i) * precision(j, j));
      rho(i, j) = value;
      rho(j, i) = value;
    }
  }
  return rho;
}

BrainGraph build_graph(const Subject& subject, Network network, const GraphOptions& options) {
  const auto& rois = subject.network(network);
  BrainGraph graph;
  graph.network = network;
  for (const auto& roi : rois) graph.roi_labels.push_back(roi.roi_label);

  Matrix cov = sample_covariance(series_matrix(rois));
  double positive_total = 0.0;
  std::size_t positive = 0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (cov(i, i) > 0.0) {
      positive_total += cov(i, i);
      ++positive;
    }
  }
  const double typical = positive > 0 ? positive_total / static_cast<double>(positive) : 1.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (cov(i, i) <= 0.0) {
      cov(i, i) = std::max(options.shrinkage, 1e-6) * typical;
      graph.stabilized_rois.push_back(static_cast<std::size_t>(i));
    }
  }

  if (options.marginal) {
    const Vector sd = cov.diagonal().cwiseSqrt();
    graph.adjacency = cov.array() / (sd * sd.transpose()).array();
    graph.adjacency.diagonal().setZero();
  } else {
    graph.adjacency = partial_correlation(precision_matrix(cov, options.shrinkage));
  }
  return graph;
}

void fix_sign(Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v.size() > 0 && v(best) < 0.0) v = -v;
}

EigenFeatures eigen_features(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (n == 0 || adjacency.cols() != n) throw Error(ErrorCode::InvalidArgument, "adjacency must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(adjacency);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "symmetric eigensolver did not converge (n=" << n
        << ", max |a_ij|=" << adjacency.cwiseAbs().maxCoeff() << ")";
    throw Error(ErrorCode::ConvergenceFailure, msg.str());
  }
  EigenFeatures f;
  // Eigen returns ascending order.
  f.eigenvalues = solver.eigenvalues().reverse();
  f.vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < n; ++c) {
    Vector col = f.vectors.col(c);
    col.normalize();
    fix_sign(col);
    f.vectors.col(c) = col;
  }
  f.leading_vector = f.vectors.col(0);

  // A repeated leading eigenvalue leaves the vector arbitrary inside its
  // eigenspace; take the normalized projection of the basis vector e_i with
  // the largest projection (lowest i on ties).
  const double tol = 1e-10 * std::max(1.0, std::abs(f.eigenvalues(0)));
  Eigen::Index multiplicity = 1;
  while (multiplicity < n && std::abs(f.eigenvalues(multiplicity) - f.eigenvalues(0)) <= tol) ++multiplicity;
  if (multiplicity > 1) {
    const Matrix basis = f.vectors.leftCols(multiplicity);
    const Matrix projections = basis * basis.transpose();  // column i = projection of e_i
    const Vector norms = projections.colwise().norm();
    const double best = norms.maxCoeff();
    Eigen::Index pick = 0;
    while (norms(pick) < best - 1e-12) ++pick;
    Vector v = projections.col(pick) / norms(pick);
    fix_sign(v);
    f.leading_vector = v;
    // Re-orthonormalize the eigenspace with v first.
    std::vector<Vector> accepted{v};
    for (Eigen::Index c = 0; c < multiplicity && static_cast<Eigen::Index>(accepted.size()) < multiplicity; ++c) {
      Vector u = basis.col(c);
      for (const auto& a : accepted) u -= a.dot(u) * a;
      for (const auto& a : accepted) u -= a.dot(u) * a;
      if (u.norm() > 1e-6) {
        u.normalize();
        fix_sign(u);
        accepted.push_back(u);
      }
    }
    for (Eigen::Index c = 0; c < multiplicity; ++c) f.vectors.col(c) = accepted[static_cast<std::size_t>(c)];
  }
  return f;
}

RoiRanking degree_and_rank(const Matrix& adjacency, const DegreeOptions& options) {
  if (!(options.threshold >= 0.0)) throw Error(ErrorCode::InvalidArgument, "edge threshold must be >= 0");
  const auto n = static_cast<std::size_t>(adjacency.rows());
  RoiRanking ranking;
  ranking.degree.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const bool edge = options.signed_edges ? w > options.threshold : std::abs(w) > options.threshold;
      if (edge) ++ranking.degree[i];
    }
  }
  ranking.order.resize(n);
  std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) { return ranking.degree[a] > ranking.degree[b]; });
  return ranking;
}

std::vector<FrequencyTable> top_roi_frequency(const std::vector<RoiRanking>& rankings,
                                              const std::vector<Label>& labels,
                                              const std::vector<std::string>& roi_labels,
                                              std::size_t k) {
  if (rankings.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "rankings and labels differ in length");
  }
  const std::size_t n = roi_labels.size();
  if (k > n) {
    throw Error(ErrorCode::InvalidArgument,
                "top-k of " + std::to_string(k) + " exceeds ROI count " + std::to_string(n));
  }
  std::vector<FrequencyTable> tables;
  for (Label label : {Label::class0, Label::class1}) {
    FrequencyTable table;
    table.label = label;
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t s = 0; s < rankings.size(); ++s) {
      if (labels[s] != label) continue;
      ++table.class_size;
      const auto& order = rankings[s].order;
      if (order.size() != n) throw Error(ErrorCode::InvalidArgument, "ranking size differs from ROI count");
      for (std::size_t r = 0; r < k; ++r) ++counts[order[r]];
    }
    for (std::size_t roi = 0; roi < n; ++roi) {
      const double fraction = table.class_size ? static_cast<double>(counts[roi]) / static_cast<double>(table.class_size) : 0.0;
      table.rows.push_back({roi, roi_labels[roi], counts[roi], fraction});
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const FrequencyRow& a, const FrequencyRow& b) { return a.count > b.count; });
    tables.push_back(std::move(table));
  }
  return tables;
}

}  // namespace twoscale::connectivity
