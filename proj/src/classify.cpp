#include "twoscale/classify.hpp"

#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"
#include "twoscale/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace twoscale::classify {

std::string_view feature_kind_name(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::eigenvalues: return "eigval";
    case FeatureKind::leading_eigenvector: return "eigvec";
    case FeatureKind::rqa: return "rqa";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "eigval" || text == "eigenvalues") return FeatureKind::eigenvalues;
  if (text == "eigvec" || text == "leading_eigenvector") return FeatureKind::leading_eigenvector;
  if (text == "rqa") return FeatureKind::rqa;
  throw Error(ErrorCode::InvalidArgument, "unknown feature family '" + std::string(text) + "'");
}

void check_table(const FeatureTable& table) {
  if (table.rows.empty()) throw Error(ErrorCode::EmptyData, "feature table is empty");
  if (table.labels.size() != table.rows.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature table has " + std::to_string(table.rows.size()) +
                                                " rows but " + std::to_string(table.labels.size()) + " labels");
  }
  const std::size_t d = table.rows.front().size();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != d) throw Error(ErrorCode::InvalidArgument, "feature rows differ in dimension");
    if (table.labels[i] != 0 && table.labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    for (double v : table.rows[i]) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "feature table contains non-finite values");
    }
  }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const auto& node = nodes[at];
    at = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[at];
}

double DecisionTree::predict_probability(std::span<const double> x) const {
  return leaf_for(x).probability();
}

int DecisionTree::predict(std::span<const double> x) const {
  const auto& leaf = leaf_for(x);
  return 2 * leaf.class1 > leaf.samples ? 1 : 0;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

Split best_split(const FeatureTable& table, std::span<const std::size_t> samples, std::size_t min_leaf) {
  using Wide = unsigned __int128;
  Split best;
  if (samples.size() < 2 || samples.size() < 2 * min_leaf) return best;
  // Children impurity is proportional to l0*l1/nl + r0*r1/nr, kept as the
  // exact fraction num/den.
  Wide best_num = 0;
  Wide best_den = 1;

  std::size_t total1 = 0;
  for (std::size_t s : samples) total1 += static_cast<std::size_t>(table.labels[s]);
  const std::size_t total = samples.size();

  std::vector<std::size_t> order(samples.begin(), samples.end());
  const std::size_t d = table.dimension();
  for (std::size_t f = 0; f < d; ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return table.rows[a][f] < table.rows[b][f]; });
    std::size_t left1 = 0;
    for (std::size_t p = 1; p < total; ++p) {
      left1 += static_cast<std::size_t>(table.labels[order[p - 1]]);
      const double lo = table.rows[order[p - 1]][f];
      const double hi = table.rows[order[p]][f];
      if (!(lo < hi)) continue;
      const std::size_t nl = p;
      const std::size_t nr = total - p;
      if (nl < min_leaf || nr < min_leaf) continue;
      const std::size_t l1 = left1;
      const std::size_t l0 = nl - l1;
      const std::size_t r1 = total1 - l1;
      const std::size_t r0 = nr - r1;
      const Wide num = Wide(l0) * l1 * nr + Wide(r0) * r1 * nl;
      const Wide den = Wide(nl) * nr;
      if (!best.found || num * best_den < best_num * den) {
        best.found = true;
        best.feature = f;
        best.threshold = lo + (hi - lo) / 2.0;
        best_num = num;
        best_den = den;
      }
    }
  }
  return best;
}

namespace {

std::size_t grow(DecisionTree& tree, const FeatureTable& table, std::vector<std::size_t> samples,
                 std::size_t depth, const TreeParams& params) {
  const std::size_t id = tree.nodes.size();
  tree.nodes.emplace_back();
  TreeNode node;
  node.samples = samples.size();
  for (std::size_t s : samples) node.class1 += static_cast<std::size_t>(table.labels[s]);
  const bool pure = node.class1 == 0 || node.class1 == node.samples;
  if (pure || depth >= params.max_depth || node.samples < 2 * params.min_leaf) {
    tree.nodes[id] = node;
    return id;
  }
  const Split split = best_split(table, samples, params.min_leaf);
  if (!split.found) {
    tree.nodes[id] = node;
    return id;
  }
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  for (std::size_t s : samples) {
    (table.rows[s][split.feature] <= split.threshold ? left : right).push_back(s);
  }
  samples.clear();
  samples.shrink_to_fit();
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.left = grow(tree, table, std::move(left), depth + 1, params);
  node.right = grow(tree, table, std::move(right), depth + 1, params);
  tree.nodes[id] = node;
  return id;
}

}  // namespace

DecisionTree fit_tree(const FeatureTable& table, std::span<const std::size_t> samples,
                      const TreeParams& params) {
  if (samples.empty() || table.rows.empty()) throw Error(ErrorCode::EmptyData, "cannot fit a tree on no samples");
  if (params.min_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
  DecisionTree tree;
  grow(tree, table, std::vector<std::size_t>(samples.begin(), samples.end()), 0, params);
  return tree;
}

DecisionTree fit_tree(const FeatureTable& table, const TreeParams& params) {
  std::vector<std::size_t> all(table.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_tree(table, all, params);
}

std::size_t BaggedEnsemble::votes_for_class1(std::span<const double> x) const {
  std::size_t votes = 0;
  for (const auto& tree : trees) votes += static_cast<std::size_t>(tree.predict(x));
  return votes;
}

int BaggedEnsemble::predict(std::span<const double> x) const {
  return 2 * votes_for_class1(x) > trees.size() ? 1 : 0;
}

std::vector<std::vector<std::size_t>> bootstrap_samples(std::span<const std::size_t> pool,
                                                        std::size_t trees, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> out(trees);
  for (std::size_t b = 0; b < trees; ++b) {
    Rng rng(seed, b);
    auto& draw = out[b];
    draw.resize(pool.size());
    for (auto& s : draw) s = pool[static_cast<std::size_t>(rng.below(pool.size()))];
  }
  return out;
}

BaggedEnsemble fit_ensemble(const FeatureTable& table, std::span<const std::size_t> samples,
                            std::size_t trees, std::uint64_t seed, const TreeParams& params) {
  if (trees < 1) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least one tree");
  if (samples.empty()) throw Error(ErrorCode::EmptyData, "cannot fit an ensemble on no samples");
  const auto draws = bootstrap_samples(samples, trees, seed);
  BaggedEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.trees.resize(trees);
  parallel_for(trees, [&](std::size_t b) { ensemble.trees[b] = fit_tree(table, draws[b], params); });
  return ensemble;
}

BaggedEnsemble fit_ensemble(const FeatureTable& table, std::size_t trees, std::uint64_t seed,
                            const TreeParams& params) {
  check_table(table);
  std::vector<std::size_t> all(table.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_ensemble(table, all, trees, seed, params);
}

Confusion& Confusion::operator+=(const Confusion& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

Metrics metrics(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorCode::EmptyData, "confusion matrix is empty");
  Metrics m;
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else m.precision_undefined = true;
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else m.recall_undefined = true;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least 2 folds");
  std::vector<std::size_t> assignment(labels.size(), 0);
  Rng rng(seed, 0xF01D5);
  std::size_t slot = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < folds) {
      throw Error(ErrorCode::TooFewSamples, "class " + std::to_string(cls) + " has " +
                                                std::to_string(members.size()) + " samples, fewer than " +
                                                std::to_string(folds) + " folds");
    }
    rng.shuffle(members);
    for (std::size_t i : members) assignment[i] = slot++ % folds;
  }
  return assignment;
}

MetricsReport cross_validate(const FeatureTable& table, const CvOptions& options) {
  check_table(table);
  const auto fold_of = stratified_folds(table.labels, options.folds, options.seed);

  MetricsReport report;
  report.seed = options.seed;
  report.trees = options.trees;
  report.per_fold_mean = options.per_fold_mean;
  report.feature_kind = std::string(feature_kind_name(table.provenance));
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < table.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    const auto ensemble = fit_ensemble(table, train, options.trees, mix_seed(options.seed, f + 1), options.tree);
    FoldResult result;
    result.fold = f;
    for (std::size_t i : test) {
      const int predicted = ensemble.predict(table.rows[i]);
      const int actual = table.labels[i];
      if (predicted == 1 && actual == 1) ++result.confusion.tp;
      else if (predicted == 1) ++result.confusion.fp;
      else if (actual == 1) ++result.confusion.fn;
      else ++result.confusion.tn;
    }
    result.metrics = metrics(result.confusion);
    report.confusion += result.confusion;
    report.folds.push_back(result);
  }

  report.summary = metrics(report.confusion);
  if (options.per_fold_mean) {
    Metrics mean;
    const double k = static_cast<double>(report.folds.size());
    for (const auto& fold : report.folds) {
      mean.precision += fold.metrics.precision / k;
      mean.recall += fold.metrics.recall / k;
      mean.f1 += fold.metrics.f1 / k;
      mean.accuracy += fold.metrics.accuracy / k;
      mean.precision_undefined = mean.precision_undefined || fold.metrics.precision_undefined;
      mean.recall_undefined = mean.recall_undefined || fold.metrics.recall_undefined;
    }
    report.summary = mean;
  }
  return report;
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"accuracy", m.accuracy},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined}};
}

nlohmann::ordered_json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

std::string fixed(double value, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << value;
  return out.str();
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["network"] = network;
  j["features"] = feature_kind;
  j["seed"] = seed;
  j["trees"] = trees;
  j["folds"] = folds.size();
  j["aggregation"] = per_fold_mean ? "per_fold_mean" : "pooled";
  j["metrics"] = metrics_json(summary);
  j["confusion"] = confusion_json(confusion);
  auto& per_fold = j["per_fold"] = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    per_fold.push_back({{"fold", f.fold}, {"confusion", confusion_json(f.confusion)}, {"metrics", metrics_json(f.metrics)}});
  }
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "Network,Features,Precision,Recall,F1 Score,Accuracy";
}

std::string MetricsReport::csv_row() const {
  return network + ',' + feature_kind + ',' + fixed(summary.precision, 4) + ',' + fixed(summary.recall, 4) +
         ',' + fixed(summary.f1, 4) + ',' + fixed(summary.accuracy, 4);
}

}  // namespace twoscale::classify
