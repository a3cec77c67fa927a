#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dpmerf/data.hpp"
#include "dpmerf/eval.hpp"
#include "dpmerf/rng.hpp"

using namespace dpmerf;

namespace {

Schema binary_schema(int d_num) {
  Schema s;
  for (int j = 0; j < d_num; ++j)
    s.columns.push_back({"v" + std::to_string(j), ColumnKind::numerical, {}, 0.0, 1.0});
  ColumnSpec lab{"y", ColumnKind::label, {"n", "p"}, 0.0, 1.0};
  s.columns.push_back(lab);
  s.stats_fitted = true;
  return s;
}

// Two well-separated clusters in [0,1]^2.
Dataset two_clusters(int n_per_class, double spread, std::uint64_t seed) {
  Dataset ds;
  ds.schema = binary_schema(2);
  const int n = 2 * n_per_class;
  ds.x_num.resize(n, 2);
  ds.x_cat.resize(n, 0);
  SplitMix64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const int y = i < n_per_class ? 0 : 1;
    const double cx = y == 0 ? 0.25 : 0.75;
    ds.x_num(i, 0) = std::clamp(cx + spread * rng.next_gaussian(), 0.0, 1.0);
    ds.x_num(i, 1) = std::clamp(cx + spread * rng.next_gaussian(), 0.0, 1.0);
    ds.labels.push_back(y);
  }
  return ds;
}

}  // namespace

TEST_CASE("roc auc rank statistic", "[eval]") {
  CHECK(roc_auc_from_scores({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc_from_scores({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  // All scores tied: every comparison contributes 1/2.
  CHECK(roc_auc_from_scores({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(roc_auc_from_scores({0.5}, {1}), SingleClassTrain);
}

TEST_CASE("roc auc is invariant under monotone transforms", "[eval]") {
  SplitMix64 rng(8);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) {
    scores[static_cast<std::size_t>(i)] = rng.next_gaussian();
    labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_below(2));
  }
  const double base = roc_auc_from_scores(scores, labels);
  std::vector<double> warped = scores;
  for (auto& s : warped) s = std::exp(3.0 * s) + 7.0;
  CHECK(roc_auc_from_scores(warped, labels) == base);
}

TEST_CASE("separable clusters score almost perfectly", "[eval]") {
  const Dataset train = two_clusters(400, 0.05, 91);
  const Dataset test = two_clusters(400, 0.05, 92);
  for (auto kind : {ClassifierKind::logreg, ClassifierKind::nearest_centroid}) {
    const auto reports = train_eval_classifier(train, test, kind, 1);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].metric == "roc_auc");
    CHECK(reports[0].value > 0.99);
  }
}

TEST_CASE("shuffled labels land near chance", "[eval]") {
  Dataset train = two_clusters(2000, 0.05, 93);
  Dataset test = two_clusters(5000, 0.05, 94);
  // Break the feature-label tie in both splits.
  SplitMix64 rng(95);
  for (auto* ds : {&train, &test})
    for (auto& y : ds->labels) y = static_cast<int>(rng.next_below(2));
  const auto reports = train_eval_classifier(train, test, ClassifierKind::logreg, 2);
  CHECK(reports[0].value > 0.45);
  CHECK(reports[0].value < 0.55);
}

TEST_CASE("single-class training data is rejected", "[eval]") {
  Dataset train = two_clusters(50, 0.05, 96);
  for (auto& y : train.labels) y = 0;
  const Dataset test = two_clusters(50, 0.05, 97);
  CHECK_THROWS_AS(train_eval_classifier(train, test, ClassifierKind::logreg, 3),
                  SingleClassTrain);
}

TEST_CASE("classifiers are deterministic", "[eval]") {
  const Dataset train = two_clusters(200, 0.15, 98);
  const Dataset test = two_clusters(200, 0.15, 99);
  for (auto kind : {ClassifierKind::logreg, ClassifierKind::nearest_centroid}) {
    const auto a = train_eval_classifier(train, test, kind, 4);
    const auto b = train_eval_classifier(train, test, kind, 4);
    CHECK(a[0].value == b[0].value);
  }
}

TEST_CASE("multiclass metrics on the gaussian grid", "[eval]") {
  GridMixtureConfig cfg;
  cfg.samples_per_component = 400;
  const MixtureSplit split = make_gaussian_grid(123, cfg);
  const auto reports = train_eval_classifier(split.train, split.test,
                                             ClassifierKind::nearest_centroid, 5);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].metric == "accuracy");
  CHECK(reports[0].value > 0.95);
  CHECK(reports[1].metric == "macro_f1");
  CHECK(reports[1].value > 0.95);
}

TEST_CASE("mode coverage trivial cases", "[eval]") {
  const GridMixture mix = GridMixture::make({});
  Eigen::MatrixXd exact(25 * 20, 2);
  std::vector<int> labels;
  for (int k = 0; k < 25; ++k)
    for (int r = 0; r < 20; ++r) {
      exact.row(20 * k + r) = mix.means.row(k);
      labels.push_back(mix.component_class[static_cast<std::size_t>(k)]);
    }
  CHECK(mode_coverage(exact, labels, mix) == 1.0);

  Eigen::MatrixXd far = Eigen::MatrixXd::Constant(500, 2, 100.0);
  std::vector<int> far_labels(500, 0);
  CHECK(mode_coverage(far, far_labels, mix) == 0.0);
}

TEST_CASE("mode coverage needs the right labels", "[eval]") {
  const GridMixture mix = GridMixture::make({});
  Eigen::MatrixXd pts(25 * 20, 2);
  std::vector<int> labels;
  for (int k = 0; k < 25; ++k)
    for (int r = 0; r < 20; ++r) {
      pts.row(20 * k + r) = mix.means.row(k);
      // Wrong class everywhere.
      labels.push_back((mix.component_class[static_cast<std::size_t>(k)] + 1) % 5);
    }
  CHECK(mode_coverage(pts, labels, mix) == 0.0);
}

TEST_CASE("the real training set covers every mode", "[eval]") {
  const MixtureSplit split = make_gaussian_grid(7);
  CHECK(mode_coverage(split.train, split.mixture) == 1.0);
}
