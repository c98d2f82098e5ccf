#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twoscale::classify {

enum class FeatureKind { eigenvalues, leading_eigenvector, rqa };

std::string_view feature_kind_name(FeatureKind kind) noexcept;
// Accepts eigval/eigenvalues, eigvec/leading_eigenvector and rqa.
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;  // 0 or 1
  FeatureKind provenance = FeatureKind::leading_eigenvector;

  std::size_t size() const { return rows.size(); }
  std::size_t dimension() const { return rows.empty() ? 0 : rows.front().size(); }
};

// Throws EmptyData for an empty table and InvalidArgument for ragged rows,
// non-binary labels or non-finite values.
void check_table(const FeatureTable& table);

struct TreeParams {
  std::size_t max_depth = std::numeric_limits<std::size_t>::max();
  std::size_t min_leaf = 1;
};

struct TreeNode {
  // Leaves have feature == npos.
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t feature = npos;
  double threshold = 0.0;  // go left when value <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t samples = 0;
  std::size_t class1 = 0;

  bool is_leaf() const { return feature == npos; }
  double probability() const { return samples ? static_cast<double>(class1) / static_cast<double>(samples) : 0.0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  double predict_probability(std::span<const double> x) const;
  // Class 1 iff the leaf's class-1 fraction exceeds one half.
  int predict(std::span<const double> x) const;
  std::size_t depth() const;
};

struct Split {
  std::size_t feature = TreeNode::npos;
  double threshold = 0.0;
  bool found = false;
};

// Best Gini split over the given samples (duplicates allowed). Impurity
// decreases are compared exactly in integer arithmetic; ties go to the
// lowest feature index, then the smallest threshold. Thresholds sit at
// midpoints between consecutive distinct values, and each side keeps at
// least min_leaf samples. A zero decrease still counts as a split.
Split best_split(const FeatureTable& table, std::span<const std::size_t> samples, std::size_t min_leaf);

// CART growth on a multiset of sample indices. Stops when a node is pure,
// reaches max_depth, holds fewer than 2 * min_leaf samples or admits no split.
DecisionTree fit_tree(const FeatureTable& table, std::span<const std::size_t> samples,
                      const TreeParams& params = {});
DecisionTree fit_tree(const FeatureTable& table, const TreeParams& params = {});

struct BaggedEnsemble {
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;

  // Majority vote; an even split goes to class 0.
  int predict(std::span<const double> x) const;
  std::size_t votes_for_class1(std::span<const double> x) const;
};

// Bootstrap index sets for every tree, drawn from per-tree streams of `seed`.
std::vector<std::vector<std::size_t>> bootstrap_samples(std::span<const std::size_t> pool,
                                                        std::size_t trees, std::uint64_t seed);

BaggedEnsemble fit_ensemble(const FeatureTable& table, std::span<const std::size_t> samples,
                            std::size_t trees, std::uint64_t seed, const TreeParams& params = {});
BaggedEnsemble fit_ensemble(const FeatureTable& table, std::size_t trees, std::uint64_t seed,
                            const TreeParams& params = {});

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& other);
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

// Class 1 is the positive class. Zero denominators give 0 and set the flag.
Metrics metrics(const Confusion& confusion);

struct FoldResult {
  std::size_t fold = 0;
  Confusion confusion;
  Metrics metrics;
};

struct MetricsReport {
  Metrics summary;
  Confusion confusion;
  std::vector<FoldResult> folds;
  std::uint64_t seed = 0;
  std::size_t trees = 0;
  bool per_fold_mean = false;
  std::string feature_kind;
  std::string network;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Stratified fold index for every sample. Throws TooFewSamples if a class
// has fewer members than folds.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

struct CvOptions {
  std::size_t folds = 10;
  std::size_t trees = 400;
  std::uint64_t seed = 42;
  TreeParams tree;
  bool per_fold_mean = false;
};

// Stratified k-fold evaluation. The summary is computed from the pooled
// confusion counts unless per_fold_mean is set.
MetricsReport cross_validate(const FeatureTable& table, const CvOptions& options = {});

}  // namespace twoscale::classify
