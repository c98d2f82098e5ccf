#include "oracles.hpp"
#include "test_util.hpp"

#include "twoscale/classify.hpp"
#include "twoscale/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <set>

using namespace twoscale;
using namespace twoscale::classify;

namespace {

FeatureTable table_of(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  FeatureTable t;
  t.rows = std::move(rows);
  t.labels = std::move(labels);
  for (std::size_t i = 0; i < t.rows.size(); ++i) t.ids.push_back("s" + std::to_string(i));
  return t;
}

FeatureTable blobs(Rng& rng, std::size_t per_class, double margin_sigmas) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int c = static_cast<int>(i % 2);
    const double centre = c ? margin_sigmas / 2.0 : -margin_sigmas / 2.0;
    double x = rng.normal();
    x = std::clamp(x, -margin_sigmas / 2.0 + 0.01, margin_sigmas / 2.0 - 0.01);
    rows.push_back({centre + x, rng.normal()});
    labels.push_back(c);
  }
  return table_of(rows, labels);
}

double training_accuracy(const DecisionTree& tree, const FeatureTable& t) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < t.size(); ++i) ok += tree.predict(t.rows[i]) == t.labels[i];
  return static_cast<double>(ok) / static_cast<double>(t.size());
}

}  // namespace

TEST_CASE("single trees") {
  const auto pair = table_of({{0.0}, {1.0}}, {0, 1});
  const auto t = fit_tree(pair);
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].feature == 0);
  CHECK(t.nodes[0].threshold == 0.5);
  CHECK(training_accuracy(t, pair) == 1.0);

  const auto same = table_of({{2.0, 1.0}, {2.0, 1.0}, {2.0, 1.0}}, {1, 0, 1});
  const auto leaf = fit_tree(same);
  CHECK(leaf.nodes.size() == 1);
  CHECK(leaf.predict(same.rows[0]) == 1);

  const auto xor_table = table_of({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
  const auto x = fit_tree(xor_table);
  CHECK(x.depth() == 2);
  CHECK(training_accuracy(x, xor_table) == 1.0);

  CHECK_ERROR_CODE(fit_tree(table_of({}, {})), ErrorCode::EmptyData);
}

TEST_CASE("tree structure invariants") {
  Rng rng(2);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({rng.normal(), std::floor(rng.uniform() * 4)});
    labels.push_back(static_cast<int>(rng.below(2)));
  }
  const auto t = table_of(rows, labels);
  const auto tree = fit_tree(t, TreeParams{4, 3});
  CHECK(tree.depth() <= 4);
  for (const auto& node : tree.nodes) {
    CHECK(node.samples > 0);
    if (!node.is_leaf()) {
      CHECK(tree.nodes[node.left].samples + tree.nodes[node.right].samples == node.samples);
      CHECK(tree.nodes[node.left].samples >= 3);
      CHECK(tree.nodes[node.right].samples >= 3);
    }
  }
}

TEST_CASE("Gini splits agree with exhaustive enumeration") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.below(19);
    const std::size_t d = 1 + rng.below(3);
    const std::size_t levels = 2 + rng.below(6);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : rows[i]) v = static_cast<double>(rng.below(levels)) * 0.5;
      labels[i] = static_cast<int>(rng.below(2));
    }
    const std::size_t min_leaf = 1 + rng.below(3);
    const auto t = table_of(rows, labels);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Split fast = best_split(t, all, min_leaf);
    const auto slow = oracle::exhaustive_split(rows, labels, min_leaf);
    REQUIRE(fast.found == slow.found);
    if (fast.found) {
      CHECK(fast.feature == slow.feature);
      CHECK(fast.threshold == slow.threshold);
    }
  }
}

TEST_CASE("ensembles") {
  Rng rng(5);
  const auto data = blobs(rng, 50, 4.0);
  const auto a = fit_ensemble(data, 25, 99);
  const auto b = fit_ensemble(data, 25, 99);
  CHECK(a.trees.size() == 25);
  for (int probe = 0; probe < 50; ++probe) {
    const std::vector<double> x = {rng.normal() * 3, rng.normal() * 3};
    CHECK(a.votes_for_class1(x) == b.votes_for_class1(x));
  }

  SUBCASE("one tree is a tree on its bootstrap sample") {
    const auto one = fit_ensemble(data, 1, 4);
    std::vector<std::size_t> pool(data.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const auto boot = bootstrap_samples(pool, 1, 4);
    const auto tree = fit_tree(data, boot[0]);
    for (const auto& row : data.rows) CHECK(one.predict(row) == tree.predict(row));
  }
  SUBCASE("even vote splits go to class 0") {
    BaggedEnsemble e;
    const auto yes = fit_tree(table_of({{0.0}, {1.0}}, {1, 1}));
    const auto no = fit_tree(table_of({{0.0}, {1.0}}, {0, 0}));
    e.trees = {yes, no};
    CHECK(e.predict(std::vector<double>{0.5}) == 0);
    e.trees.push_back(yes);
    CHECK(e.predict(std::vector<double>{0.5}) == 1);
  }
  SUBCASE("duplicated class-1 samples raise a leaf's class-1 share") {
    auto t = table_of({{1.0}, {1.0}, {1.0}, {1.0}}, {0, 0, 1, 1});
    double last = fit_tree(t).predict_probability(std::vector<double>{1.0});
    for (int extra = 0; extra < 4; ++extra) {
      t.rows.push_back({1.0});
      t.labels.push_back(1);
      t.ids.push_back("dup");
      const double p = fit_tree(t).predict_probability(std::vector<double>{1.0});
      CHECK(p > last);
      last = p;
    }
  }
}

TEST_CASE("metrics") {
  const auto m = metrics(Confusion{9, 1, 1, 9});
  CHECK(m.precision == doctest::Approx(0.9));
  CHECK(m.recall == doctest::Approx(0.9));
  CHECK(m.accuracy == doctest::Approx(0.9));
  CHECK(m.f1 == doctest::Approx(0.9));

  const auto none = metrics(Confusion{0, 0, 5, 5});
  CHECK(none.precision == 0.0);
  CHECK(none.precision_undefined);
  CHECK(none.f1 == 0.0);

  // 47 of 50 predicted positives correct and 47 of 54 positives found.
  const auto reported = metrics(Confusion{47, 3, 7, 43});
  CHECK(reported.precision == doctest::Approx(0.94));
  CHECK(reported.recall == doctest::Approx(0.87).epsilon(0.005));
  CHECK(reported.f1 == doctest::Approx(0.90).epsilon(0.01));

  CHECK_ERROR_CODE(metrics(Confusion{}), ErrorCode::EmptyData);
}

TEST_CASE("stratified folds") {
  std::vector<int> labels;
  for (int i = 0; i < 53; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
  const auto folds = stratified_folds(labels, 10, 42);
  REQUIRE(folds.size() == labels.size());
  std::vector<std::size_t> per_fold(10, 0), ones(10, 0);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    REQUIRE(folds[i] < 10);
    ++per_fold[folds[i]];
    ones[folds[i]] += static_cast<std::size_t>(labels[i]);
  }
  const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
  CHECK(*hi - *lo <= 1);
  const auto [lo1, hi1] = std::minmax_element(ones.begin(), ones.end());
  CHECK(*hi1 - *lo1 <= 1);
  CHECK(folds == stratified_folds(labels, 10, 42));

  const std::vector<int> tiny = {0, 0, 0, 1, 1};
  CHECK_ERROR_CODE(stratified_folds(tiny, 3, 1), ErrorCode::TooFewSamples);
}

TEST_CASE("cross validation") {
  Rng rng(9);
  SUBCASE("leaked label") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      labels.push_back(i % 2);
      rows.push_back({rng.normal(), static_cast<double>(i % 2), rng.normal()});
    }
    const auto r = cross_validate(table_of(rows, labels), CvOptions{10, 50, 1, {}, false});
    CHECK(r.summary.accuracy == 1.0);
    CHECK(r.summary.f1 == 1.0);
    CHECK(r.confusion.total() == 60);
  }
  SUBCASE("separable blobs") {
    const auto r = cross_validate(blobs(rng, 50, 4.0), CvOptions{10, 50, 3, {}, false});
    CHECK(r.summary.accuracy >= 0.95);
  }
  SUBCASE("byte-identical reports for one seed") {
    const auto data = blobs(rng, 30, 1.0);
    const CvOptions o{5, 40, 17, {}, false};
    CHECK(cross_validate(data, o).to_json() == cross_validate(data, o).to_json());
  }
  SUBCASE("per-fold mean and schema") {
    const auto data = blobs(rng, 30, 1.0);
    auto r = cross_validate(data, CvOptions{5, 20, 2, {}, true});
    r.network = "default_mode";
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["aggregation"] == "per_fold_mean");
    CHECK(j["per_fold"].size() == 5);
    CHECK(j["seed"] == 2);
    CHECK(MetricsReport::csv_header() == "Network,Features,Precision,Recall,F1 Score,Accuracy");
    CHECK(r.csv_row().rfind("default_mode,", 0) == 0);
  }
}
