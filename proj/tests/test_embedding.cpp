#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dpmerf/embedding.hpp"
#include "dpmerf/featuremap.hpp"
#include "dpmerf/rng.hpp"

using namespace dpmerf;

namespace {

std::vector<Eigen::VectorXd> random_points(int n, int d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    p.resize(d);
    for (int i = 0; i < d; ++i) p[i] = rng.next_gaussian();
  }
  return pts;
}

Eigen::VectorXd random_onehot_blocks(const std::vector<int>& widths, SplitMix64& rng) {
  int total = 0;
  for (int w : widths) total += w;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(total);
  int off = 0;
  for (int w : widths) {
    v[off + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w)))] = 1.0;
    off += w;
  }
  return v;
}

std::vector<LabeledPoint> random_labeled(int n, int d, int c,
                                         const std::vector<int>& cat_widths,
                                         std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<LabeledPoint> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    p.x_num.resize(d);
    for (int i = 0; i < d; ++i) p.x_num[i] = rng.next_gaussian();
    p.x_cat = random_onehot_blocks(cat_widths, rng);
    p.y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(c)));
  }
  return pts;
}

}  // namespace

TEST_CASE("mean embedding of a single point is its feature vector", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 12, 1.0, 2);
  const auto pts = random_points(1, 3, 5);
  const MeanEmbedding emb = mean_embedding(pts, map);
  CHECK(emb.num_samples_m == 1);
  CHECK(emb.kind == EmbeddingKind::unlabeled);
  CHECK((emb.values.col(0) - featurize(pts[0], map)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mean embedding of m identical copies", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 8, 0.5, 3);
  auto pts = random_points(1, 2, 6);
  const Eigen::VectorXd f = featurize(pts[0], map);
  std::vector<Eigen::VectorXd> copies(17, pts[0]);
  const MeanEmbedding emb = mean_embedding(copies, map);
  CHECK((emb.values.col(0) - f).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mean embedding matches naive summation oracle", "[embedding]") {
  const FeatureMap map = sample_frequencies(4, 20, 1.3, 11);
  const auto pts = random_points(37, 4, 13);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(20);
  for (const auto& p : pts) oracle += featurize(p, map);
  oracle /= 37.0;
  const MeanEmbedding emb = mean_embedding(pts, map);
  CHECK((emb.values.col(0) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(mean_embedding({}, map), EmptyDataset);
}

TEST_CASE("labeled embedding routes a point to its class column", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 10, 1.0, 4);
  std::vector<LabeledPoint> pts(1);
  pts[0].x_num = random_points(1, 3, 8)[0];
  pts[0].x_cat.resize(0);
  pts[0].y = 2;
  const MeanEmbedding emb = labeled_mean_embedding(pts, map, 3);
  CHECK(emb.kind == EmbeddingKind::labeled);
  CHECK(emb.values.col(0).isZero(0.0));
  CHECK(emb.values.col(1).isZero(0.0));
  CHECK((emb.values.col(2) - featurize(pts[0].x_num, map)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("labeled embedding leaves empty classes as zero columns", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 6, 1.0, 4);
  auto pts = random_labeled(10, 2, 2, {}, 21);
  for (auto& p : pts) p.y = 0;
  const MeanEmbedding emb = labeled_mean_embedding(pts, map, 2);
  CHECK(emb.values.col(1).isZero(0.0));
  CHECK(!emb.values.col(0).isZero(0.0));
}

TEST_CASE("labeled embedding rejects bad labels", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 6, 1.0, 4);
  auto pts = random_labeled(5, 2, 2, {}, 22);
  pts[3].y = 2;
  CHECK_THROWS_AS(labeled_mean_embedding(pts, map, 2), LabelOutOfRange);
  CHECK_THROWS_AS(labeled_mean_embedding({}, map, 2), EmptyDataset);
}

TEST_CASE("labeled embedding satisfies the product-kernel identity", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 16, 0.9, 6);
  const auto pts = random_labeled(20, 3, 2, {}, 31);
  const MeanEmbedding emb = labeled_mean_embedding(pts, map, 2);
  SplitMix64 rng(77);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd probe(3);
    for (int i = 0; i < 3; ++i) probe[i] = rng.next_gaussian();
    const int y = static_cast<int>(rng.next_below(2));
    // <vec(mu), vec(phi(x) e_y^T)> reduces to mu.col(y) . phi(x)
    const double lhs = emb.values.col(y).dot(featurize(probe, map));
    double rhs = 0.0;
    for (const auto& p : pts)
      rhs += approx_kernel(p.x_num, probe, map) * (p.y == y ? 1.0 : 0.0);
    rhs /= static_cast<double>(pts.size());
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
  }
}

TEST_CASE("labeled embedding equals per-class partial sums over m", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 10, 1.1, 8);
  const auto pts = random_labeled(40, 2, 3, {}, 41);
  const MeanEmbedding emb = labeled_mean_embedding(pts, map, 3);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd partial = Eigen::VectorXd::Zero(10);
    for (const auto& p : pts)
      if (p.y == c) partial += featurize(p.x_num, map);
    partial /= static_cast<double>(pts.size());
    CHECK((emb.values.col(c) - partial).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hetero_feature concatenation and norm", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 8, 1.0, 9);
  Eigen::VectorXd x = random_points(1, 2, 55)[0];
  Eigen::VectorXd cat(4);
  cat << 1, 0, 0, 0;
  const Eigen::VectorXd h = hetero_feature(x, cat, map);
  CHECK(h.size() == 12);
  CHECK(h[8] == 0.5);
  CHECK(h[9] == 0.0);
  CHECK(h.norm() == Catch::Approx(std::sqrt(1.25)).margin(1e-9));

  Eigen::VectorXd bad(2);
  bad << 0.5, 0.5;
  CHECK_THROWS_AS(hetero_feature(x, bad, map), NonBinaryCategorical);
  CHECK_THROWS_AS(hetero_feature(x, Eigen::VectorXd(), map), DimensionMismatch);
}

TEST_CASE("hetero_feature satisfies the sum-kernel identity", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 14, 0.8, 10);
  SplitMix64 rng(91);
  const std::vector<int> widths = {3, 2};
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.next_gaussian();
      b[i] = rng.next_gaussian();
    }
    const Eigen::VectorXd ca = random_onehot_blocks(widths, rng);
    const Eigen::VectorXd cb = random_onehot_blocks(widths, rng);
    const double lhs = hetero_feature(a, ca, map).dot(hetero_feature(b, cb, map));
    const double rhs = approx_kernel(a, b, map) + ca.dot(cb) / 5.0;
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
  }
}

TEST_CASE("mmd_rf_sq basics", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 12, 1.0, 12);
  const auto xs = random_points(25, 3, 61);
  const MeanEmbedding a = mean_embedding(xs, map);
  CHECK(mmd_rf_sq(a, a) == 0.0);
  const MeanEmbedding b = mean_embedding(xs, map);
  CHECK(mmd_rf_sq(a, b) < 1e-12);

  const auto labeled = random_labeled(10, 3, 2, {}, 62);
  const MeanEmbedding c = labeled_mean_embedding(labeled, map, 2);
  CHECK_THROWS_AS(mmd_rf_sq(a, c), ShapeMismatch);
}

TEST_CASE("mmd_rf_sq equals the pairwise double sum", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 24, 1.0, 13);
  const auto xs = random_points(50, 2, 71);
  const auto ys = random_points(50, 2, 72);
  const double rf = mmd_rf_sq(mean_embedding(xs, map), mean_embedding(ys, map));
  const double full = mmd_full_sq(xs, ys, [&](const auto& a, const auto& b) {
    return approx_kernel(a, b, map);
  });
  CHECK(rf == Catch::Approx(full).margin(1e-9));
}

TEST_CASE("mmd_full_sq basics", "[embedding]") {
  const auto xs = random_points(12, 2, 81);
  const double self = mmd_full_sq(xs, xs, [&](const auto& a, const auto& b) {
    return exact_gaussian_kernel(a, b, 1.0);
  });
  CHECK(std::abs(self) < 1e-12);

  const std::vector<Eigen::VectorXd> x1 = {xs[0]}, x2 = {xs[1]};
  const double single = mmd_full_sq(x1, x2, [&](const auto& a, const auto& b) {
    return exact_gaussian_kernel(a, b, 0.9);
  });
  const double expected = 2.0 - 2.0 * exact_gaussian_kernel(xs[0], xs[1], 0.9);
  CHECK(single == Catch::Approx(expected).margin(1e-12));
  CHECK_THROWS_AS(mmd_full_sq(std::vector<Eigen::VectorXd>{}, xs,
                              [](const auto&, const auto&) { return 0.0; }),
                  EmptyDataset);
}

TEST_CASE("mmd identity holds in both directions on uneven sets", "[embedding]") {
  const FeatureMap map = sample_frequencies(3, 18, 1.2, 14);
  const auto xs = random_points(30, 3, 91);
  const auto ys = random_points(40, 3, 92);
  const auto kernel = [&](const auto& a, const auto& b) { return approx_kernel(a, b, map); };
  const double full = mmd_full_sq(xs, ys, kernel);
  const double rf = mmd_rf_sq(mean_embedding(xs, map), mean_embedding(ys, map));
  CHECK(full == Catch::Approx(rf).margin(1e-9));
  CHECK(mmd_full_sq(ys, xs, kernel) == Catch::Approx(rf).margin(1e-9));
}

TEST_CASE("labeled mmd matches the product-kernel double sum", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 20, 1.0, 15);
  const auto xs = random_labeled(30, 2, 3, {}, 101);
  const auto ys = random_labeled(25, 2, 3, {}, 102);
  const double rf = mmd_rf_sq(labeled_mean_embedding(xs, map, 3),
                              labeled_mean_embedding(ys, map, 3));
  const double full = mmd_full_sq(xs, ys, [&](const LabeledPoint& a, const LabeledPoint& b) {
    return approx_kernel(a.x_num, b.x_num, map) * (a.y == b.y ? 1.0 : 0.0);
  });
  CHECK(rf == Catch::Approx(full).margin(1e-9));
}

TEST_CASE("hetero mmd matches the sum-kernel double sum", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 20, 1.0, 16);
  const std::vector<int> widths = {2, 3};
  const auto xs = random_labeled(30, 2, 2, widths, 111);
  const auto ys = random_labeled(20, 2, 2, widths, 112);
  const double rf = mmd_rf_sq(labeled_mean_embedding(xs, map, 2),
                              labeled_mean_embedding(ys, map, 2));
  const double full = mmd_full_sq(xs, ys, [&](const LabeledPoint& a, const LabeledPoint& b) {
    const double kx = approx_kernel(a.x_num, b.x_num, map) + a.x_cat.dot(b.x_cat) / 5.0;
    return kx * (a.y == b.y ? 1.0 : 0.0);
  });
  CHECK(rf == Catch::Approx(full).margin(1e-9));
}

TEST_CASE("embedding norm bounds hold on random datasets", "[embedding]") {
  const FeatureMap map = sample_frequencies(2, 10, 1.0, 17);
  SplitMix64 rng(5005);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_below(15));
    const int c = 2 + static_cast<int>(rng.next_below(3));
    const bool hetero = trial % 2 == 1;
    const std::vector<int> widths = hetero ? std::vector<int>{2, 2} : std::vector<int>{};
    const auto pts = random_labeled(m, 2, c, widths, 2000 + static_cast<std::uint64_t>(trial));
    const MeanEmbedding emb = labeled_mean_embedding(pts, map, c);
    const double bound = hetero ? std::sqrt(2.0) : 1.0;
    CHECK(emb.values.norm() <= bound + 1e-12);

    std::vector<Eigen::VectorXd> raw(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) raw[i] = pts[i].x_num;
    CHECK(mean_embedding(raw, map).values.norm() <= 1.0 + 1e-12);
  }
}
