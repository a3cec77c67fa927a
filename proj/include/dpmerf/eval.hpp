#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/data.hpp"
#include "dpmerf/errors.hpp"

namespace dpmerf {

struct EvalReport {
  std::string metric;      // roc_auc | accuracy | macro_f1 | nll | mode_coverage
  double value = 0.0;
  std::string classifier;  // logreg | nearest_centroid | - for data metrics
  std::uint64_t seed = 0;
};

enum class ClassifierKind { logreg, nearest_centroid };

// Area under the ROC curve by the rank statistic; tied scores contribute 0.5.
// Invariant under strictly monotone transforms of the scores.
inline double roc_auc_from_scores(const std::vector<double>& scores,
                                  const std::vector<int>& labels01) {
  if (scores.size() != labels01.size() || scores.empty())
    throw ShapeMismatch("roc_auc: scores/labels mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0, n_neg = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels01[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  for (int y : labels01) (y == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw SingleClassTrain("roc_auc needs both classes in the test set");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace detail {

inline Eigen::MatrixXd feature_matrix(const Dataset& ds) {
  Eigen::MatrixXd x(ds.size(), ds.x_num.cols() + ds.x_cat.cols());
  x.leftCols(ds.x_num.cols()) = ds.x_num;
  x.rightCols(ds.x_cat.cols()) = ds.x_cat;
  return x;
}

inline Eigen::MatrixXd onehot_labels(const std::vector<int>& y, int c) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), c);
  for (std::size_t i = 0; i < y.size(); ++i)
    m(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  return m;
}

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    p.row(i) = (e / e.sum()).matrix().transpose();
  }
  return p;
}

inline double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int c) {
  double total = 0.0;
  for (int k = 0; k < c; ++k) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == k && truth[i] == k) ++tp;
      else if (pred[i] == k) ++fp;
      else if (truth[i] == k) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    total += denom > 0.0 ? 2.0 * tp / denom : 0.0;
  }
  return total / c;
}

}  // namespace detail

// Trains a simple classifier on the (typically synthetic) train set and
// scores it on the test set. logreg is multinomial logistic regression by
// full-batch gradient descent (2000 iters, lr 0.1, L2 1e-4); nearest_centroid
// is the per-class-mean classifier. Binary tasks report roc_auc over the
// positive-class (index 1) score, multiclass tasks report accuracy and
// macro_f1.
inline std::vector<EvalReport> train_eval_classifier(const Dataset& train,
                                                     const Dataset& test,
                                                     ClassifierKind kind,
                                                     std::uint64_t seed) {
  if (train.schema.num_classes() != test.schema.num_classes() ||
      train.x_num.cols() != test.x_num.cols() ||
      train.x_cat.cols() != test.x_cat.cols())
    throw SchemaMismatch("train/test schemas do not agree");
  const int c = train.schema.num_classes();
  const auto counts = train.class_counts();
  int present = 0;
  for (auto k : counts) present += (k > 0);
  if (present < 2) throw SingleClassTrain("training set has fewer than 2 classes");

  const Eigen::MatrixXd xtr = detail::feature_matrix(train);
  const Eigen::MatrixXd xte = detail::feature_matrix(test);
  Eigen::MatrixXd scores;  // test x C, larger = more likely

  const char* tag = kind == ClassifierKind::logreg ? "logreg" : "nearest_centroid";
  if (kind == ClassifierKind::logreg) {
    constexpr int kIters = 2000;
    constexpr double kLr = 0.1, kL2 = 1e-4;
    const Eigen::MatrixXd y = detail::onehot_labels(train.labels, c);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(c, xtr.cols());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(c);
    const double n = static_cast<double>(xtr.rows());
    for (int it = 0; it < kIters; ++it) {
      Eigen::MatrixXd logits = xtr * w.transpose();
      logits.rowwise() += b.transpose();
      const Eigen::MatrixXd p = detail::softmax_rows(logits);
      const Eigen::MatrixXd resid = (p - y) / n;
      w -= kLr * (resid.transpose() * xtr + kL2 * w);
      b -= kLr * resid.colwise().sum().transpose();
    }
    scores = xte * w.transpose();
    scores.rowwise() += b.transpose();
    scores = detail::softmax_rows(scores);
  } else {
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(c, xtr.cols());
    for (Eigen::Index i = 0; i < xtr.rows(); ++i)
      centroids.row(train.labels[static_cast<std::size_t>(i)]) += xtr.row(i);
    for (int k = 0; k < c; ++k)
      if (counts[static_cast<std::size_t>(k)] > 0)
        centroids.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    scores.resize(xte.rows(), c);
    for (Eigen::Index i = 0; i < xte.rows(); ++i)
      for (int k = 0; k < c; ++k)
        scores(i, k) = counts[static_cast<std::size_t>(k)] > 0
                           ? -(xte.row(i) - centroids.row(k)).norm()
                           : -std::numeric_limits<double>::infinity();
  }

  std::vector<EvalReport> reports;
  if (c == 2) {
    std::vector<double> pos_scores(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
      pos_scores[static_cast<std::size_t>(i)] = scores(i, 1) - scores(i, 0);
    reports.push_back({"roc_auc", roc_auc_from_scores(pos_scores, test.labels), tag, seed});
  } else {
    std::vector<int> pred(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == test.labels[i]);
    reports.push_back({"accuracy", static_cast<double>(hits) / static_cast<double>(pred.size()), tag, seed});
    reports.push_back({"macro_f1", detail::macro_f1(test.labels, pred, c), tag, seed});
  }
  return reports;
}

// Fraction of mixture components with at least min_hits samples of the right
// class within radius_sigmas * component_std of the component mean.
inline double mode_coverage(const Eigen::MatrixXd& points_raw,
                            const std::vector<int>& labels, const GridMixture& mix,
                            int min_hits = 10, double radius_sigmas = 3.0) {
  if (points_raw.cols() != 2) throw DimensionMismatch("mode_coverage expects 2-D points");
  if (static_cast<std::size_t>(points_raw.rows()) != labels.size())
    throw DimensionMismatch("mode_coverage: points/labels size mismatch");
  const double radius = radius_sigmas * mix.component_std;
  std::vector<int> hits(25, 0);
  for (Eigen::Index i = 0; i < points_raw.rows(); ++i)
    for (int k = 0; k < 25; ++k) {
      if (mix.component_class[static_cast<std::size_t>(k)] != labels[static_cast<std::size_t>(i)])
        continue;
      if ((points_raw.row(i) - mix.means.row(k)).norm() <= radius) ++hits[static_cast<std::size_t>(k)];
    }
  int covered = 0;
  for (int h : hits) covered += (h >= min_hits);
  return covered / 25.0;
}

inline double mode_coverage(const Dataset& ds, const GridMixture& mix,
                            int min_hits = 10, double radius_sigmas = 3.0) {
  return mode_coverage(ds.denormalized_num(), ds.labels, mix, min_hits, radius_sigmas);
}

}  // namespace dpmerf
