#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/errors.hpp"
#include "dpmerf/featuremap.hpp"

namespace dpmerf {

enum class EmbeddingKind { unlabeled, labeled, hetero_labeled };

inline const char* to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::unlabeled: return "unlabeled";
    case EmbeddingKind::labeled: return "labeled";
    case EmbeddingKind::hetero_labeled: return "hetero_labeled";
  }
  return "?";
}

// Random-feature mean embedding. One column for unlabeled data, one column
// per class otherwise. Rows are D for homogeneous inputs and D + d_cat when
// the per-point feature carries a categorical block.
struct MeanEmbedding {
  Eigen::MatrixXd values;  // D_eff x C
  std::int64_t num_samples_m = 0;
  EmbeddingKind kind = EmbeddingKind::unlabeled;
};

struct LabeledPoint {
  Eigen::VectorXd x_num;
  Eigen::VectorXd x_cat;  // binary, possibly empty
  int y = 0;
};

namespace detail {

inline void check_binary(const Eigen::VectorXd& x_cat) {
  for (Eigen::Index i = 0; i < x_cat.size(); ++i)
    if (x_cat[i] != 0.0 && x_cat[i] != 1.0)
      throw NonBinaryCategorical("categorical entry " + std::to_string(i) +
                                 " is " + std::to_string(x_cat[i]));
}

}  // namespace detail

// [phi(x_num); x_cat / sqrt(d_cat)] — the explicit feature of the sum of the
// Gaussian kernel on numericals and the normalized linear kernel on one-hot
// categoricals. Norm is at most sqrt(2).
inline Eigen::VectorXd hetero_feature(const Eigen::VectorXd& x_num,
                                      const Eigen::VectorXd& x_cat,
                                      const FeatureMap& map) {
  if (x_cat.size() < 1)
    throw DimensionMismatch("hetero_feature requires d_cat >= 1");
  detail::check_binary(x_cat);
  const Eigen::VectorXd phi = featurize(x_num, map);
  Eigen::VectorXd out(phi.size() + x_cat.size());
  out.head(phi.size()) = phi;
  out.tail(x_cat.size()) = x_cat / std::sqrt(static_cast<double>(x_cat.size()));
  return out;
}

namespace detail {

// Per-sample features as columns (D/2 x len blocks of cos and sin), which
// keeps the per-sample accumulation contiguous.
struct FeatureColumns {
  Eigen::MatrixXd ca, sa;  // D/2 x len each
};

inline FeatureColumns featurize_cols(const Eigen::MatrixXd& block,
                                     const FeatureMap& map) {
  FeatureColumns fc;
  const Eigen::MatrixXd args = map.frequencies * block.transpose();
  cos_sin(args, fc.ca, fc.sa);
  return fc;
}

}  // namespace detail

inline MeanEmbedding mean_embedding(const std::vector<Eigen::VectorXd>& points,
                                    const FeatureMap& map) {
  if (points.empty()) throw EmptyDataset("mean_embedding: no points");
  const int half = map.num_features / 2;
  const double scale = std::sqrt(2.0 / map.num_features);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(map.num_features);

  constexpr Eigen::Index kChunk = 512;
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    Eigen::MatrixXd block(len, map.input_dim());
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto& x = points[static_cast<std::size_t>(start + i)];
      if (x.size() != map.input_dim())
        throw DimensionMismatch("mean_embedding: point dim mismatch");
      block.row(i) = x.transpose();
    }
    const auto fc = detail::featurize_cols(block, map);
    for (Eigen::Index i = 0; i < len; ++i) {
      sum.head(half) += scale * fc.ca.col(i);
      sum.tail(half) += scale * fc.sa.col(i);
    }
  }

  MeanEmbedding emb;
  emb.values = sum / static_cast<double>(points.size());
  emb.num_samples_m = static_cast<std::int64_t>(points.size());
  emb.kind = EmbeddingKind::unlabeled;
  return emb;
}

// Column c is the sum of per-point features over class-c points divided by
// the total sample count m (not by the class count). Empty classes are zero
// columns. The per-point feature is phi(x_num) when d_cat = 0 and
// hetero_feature otherwise.
inline MeanEmbedding labeled_mean_embedding(const std::vector<LabeledPoint>& points,
                                            const FeatureMap& map,
                                            int num_classes) {
  if (points.empty()) throw EmptyDataset("labeled_mean_embedding: no points");
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  const Eigen::Index d_cat = points.front().x_cat.size();
  const bool hetero = d_cat > 0;
  const int rows = map.num_features + static_cast<int>(d_cat);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, num_classes);
  const double cat_scale = hetero ? 1.0 / std::sqrt(static_cast<double>(d_cat)) : 0.0;
  const int half = map.num_features / 2;
  const double scale = std::sqrt(2.0 / map.num_features);

  // Featurize in chunks; accumulation stays in row order so the result does
  // not depend on the chunk size beyond float association, which is fixed.
  constexpr Eigen::Index kChunk = 512;
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    Eigen::MatrixXd block(len, map.input_dim());
    for (Eigen::Index i = 0; i < len; ++i) {
      const LabeledPoint& p = points[static_cast<std::size_t>(start + i)];
      if (p.y < 0 || p.y >= num_classes)
        throw LabelOutOfRange("label " + std::to_string(p.y) +
                              " outside [0, " + std::to_string(num_classes) + ")");
      if (p.x_cat.size() != d_cat)
        throw DimensionMismatch("inconsistent categorical width");
      if (hetero) detail::check_binary(p.x_cat);
      if (p.x_num.size() != map.input_dim())
        throw DimensionMismatch("labeled_mean_embedding: point dim mismatch");
      block.row(i) = p.x_num.transpose();
    }
    const auto fc = detail::featurize_cols(block, map);
    for (Eigen::Index i = 0; i < len; ++i) {
      const LabeledPoint& p = points[static_cast<std::size_t>(start + i)];
      sum.col(p.y).head(half) += scale * fc.ca.col(i);
      sum.col(p.y).segment(half, half) += scale * fc.sa.col(i);
      if (hetero) sum.col(p.y).tail(d_cat) += cat_scale * p.x_cat;
    }
  }

  MeanEmbedding emb;
  emb.values = sum / static_cast<double>(n);
  emb.num_samples_m = static_cast<std::int64_t>(n);
  emb.kind = hetero ? EmbeddingKind::hetero_labeled : EmbeddingKind::labeled;
  return emb;
}

// Squared MMD in random-feature form: squared Frobenius norm of the
// difference of two mean embeddings.
inline double mmd_rf_sq(const MeanEmbedding& a, const MeanEmbedding& b) {
  if (a.kind != b.kind)
    throw ShapeMismatch(std::string("embedding kinds differ: ") +
                        to_string(a.kind) + " vs " + to_string(b.kind));
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw ShapeMismatch("embedding shapes differ");
  return (a.values - b.values).squaredNorm();
}

// Biased V-statistic MMD^2 from pairwise kernel evaluations:
//   1/m^2 sum k(x_i, x_j) + 1/n^2 sum k(y_i, y_j) - 2/(mn) sum k(x_i, y_j).
template <typename Point, typename Kernel>
double mmd_full_sq(const std::vector<Point>& xs, const std::vector<Point>& ys,
                   Kernel&& kernel) {
  if (xs.empty() || ys.empty()) throw EmptyDataset("mmd_full_sq: empty set");
  const double m = static_cast<double>(xs.size());
  const double n = static_cast<double>(ys.size());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (const auto& a : xs)
    for (const auto& b : xs) kxx += kernel(a, b);
  for (const auto& a : ys)
    for (const auto& b : ys) kyy += kernel(a, b);
  for (const auto& a : xs)
    for (const auto& b : ys) kxy += kernel(a, b);
  return kxx / (m * m) + kyy / (n * n) - 2.0 * kxy / (m * n);
}

}  // namespace dpmerf
