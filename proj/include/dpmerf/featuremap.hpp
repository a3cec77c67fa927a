#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/errors.hpp"
#include "dpmerf/rng.hpp"

namespace dpmerf {

// Random Fourier feature map for the Gaussian kernel
// k(x, x') = exp(-||x - x'||^2 / (2 gamma^2)).
// Frequencies are drawn once from N(0, 1/gamma^2) and frozen; featurizing is
// a pure function of (x, frequencies).
struct FeatureMap {
  Eigen::MatrixXd frequencies;  // (D/2) x d, row j is omega_j
  int num_features = 0;         // D, even
  double bandwidth = 0.0;       // gamma, in data units
  std::uint64_t seed = 0;

  int input_dim() const { return static_cast<int>(frequencies.cols()); }
};

inline FeatureMap sample_frequencies(int input_dim, int num_features,
                                     double bandwidth, std::uint64_t seed) {
  if (num_features < 2 || num_features % 2 != 0)
    throw InvalidConfig("num_features must be a positive even integer, got " +
                        std::to_string(num_features));
  if (input_dim < 1) throw InvalidConfig("input_dim must be >= 1");
  if (!(bandwidth > 0.0)) throw InvalidConfig("bandwidth must be > 0");

  FeatureMap map;
  map.num_features = num_features;
  map.bandwidth = bandwidth;
  map.seed = seed;
  map.frequencies.resize(num_features / 2, input_dim);
  SplitMix64 rng(seed);
  fill_gaussian(map.frequencies, rng, 1.0 / bandwidth);
  return map;
}

namespace detail {

// Cosine and sine of every entry in one pass per element.
inline void cos_sin(const Eigen::MatrixXd& args, Eigen::MatrixXd& c,
                    Eigen::MatrixXd& s) {
  c.resize(args.rows(), args.cols());
  s.resize(args.rows(), args.cols());
  const double* a = args.data();
  double* cp = c.data();
  double* sp = s.data();
  const Eigen::Index n = args.size();
  for (Eigen::Index i = 0; i < n; ++i) {
#if defined(__GLIBC__)
    ::sincos(a[i], sp + i, cp + i);
#else
    cp[i] = std::cos(a[i]);
    sp[i] = std::sin(a[i]);
#endif
  }
}

}  // namespace detail

// Feature rows for a batch X (N x d) -> (N x D). Coordinate j holds
// sqrt(2/D) cos(omega_j . x), coordinate j + D/2 the matching sine, so every
// row has unit L2 norm.
inline Eigen::MatrixXd featurize_rows(const Eigen::MatrixXd& x,
                                      const FeatureMap& map) {
  if (x.cols() != map.frequencies.cols())
    throw DimensionMismatch("featurize: input has dim " +
                            std::to_string(x.cols()) + ", map expects " +
                            std::to_string(map.frequencies.cols()));
  const int half = map.num_features / 2;
  const double scale = std::sqrt(2.0 / map.num_features);
  const Eigen::MatrixXd args = x * map.frequencies.transpose();  // N x D/2
  Eigen::MatrixXd ca, sa;
  detail::cos_sin(args, ca, sa);
  Eigen::MatrixXd out(x.rows(), map.num_features);
  out.leftCols(half) = scale * ca;
  out.rightCols(half) = scale * sa;
  return out;
}

inline Eigen::VectorXd featurize(const Eigen::VectorXd& x, const FeatureMap& map) {
  return featurize_rows(x.transpose(), map).row(0).transpose();
}

inline double approx_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const FeatureMap& map) {
  return featurize(x, map).dot(featurize(y, map));
}

inline double exact_gaussian_kernel(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidConfig("bandwidth must be > 0");
  if (x.size() != y.size())
    throw DimensionMismatch("exact_gaussian_kernel: size mismatch");
  const double sq = (x - y).squaredNorm();
  return std::exp(-sq / (2.0 * bandwidth * bandwidth));
}

// Median of pairwise Euclidean distances over at most max_pairs sampled
// distinct row pairs (all pairs when they fit). Even counts take the mean of
// the two central values. A zero median means the sample carries no scale
// information, which is reported as DegenerateData.
inline double median_heuristic_bandwidth(const Eigen::MatrixXd& data,
                                         std::int64_t max_pairs,
                                         std::uint64_t seed) {
  const std::int64_t n = data.rows();
  if (n < 2) throw InvalidConfig("median heuristic needs at least 2 rows");
  if (max_pairs < 1) throw InvalidConfig("max_pairs must be >= 1");

  std::vector<double> dists;
  const std::int64_t total = n * (n - 1) / 2;
  if (total <= max_pairs) {
    dists.reserve(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i + 1; j < n; ++j)
        dists.push_back((data.row(i) - data.row(j)).norm());
  } else {
    SplitMix64 rng(seed);
    std::unordered_set<std::uint64_t> seen;
    dists.reserve(static_cast<std::size_t>(max_pairs));
    while (static_cast<std::int64_t>(dists.size()) < max_pairs) {
      std::uint64_t i = rng.next_below(static_cast<std::uint64_t>(n));
      std::uint64_t j = rng.next_below(static_cast<std::uint64_t>(n));
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      const std::uint64_t key = i * static_cast<std::uint64_t>(n) + j;
      if (!seen.insert(key).second) continue;
      dists.push_back((data.row(static_cast<Eigen::Index>(i)) -
                       data.row(static_cast<Eigen::Index>(j)))
                          .norm());
    }
  }

  std::sort(dists.begin(), dists.end());
  const std::size_t k = dists.size();
  const double median =
      (k % 2 == 1) ? dists[k / 2] : 0.5 * (dists[k / 2 - 1] + dists[k / 2]);
  if (!(median > 0.0))
    throw DegenerateData("median pairwise distance is zero");
  return median;
}

}  // namespace dpmerf
