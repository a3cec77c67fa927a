#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/embedding.hpp"
#include "dpmerf/errors.hpp"
#include "dpmerf/rng.hpp"

namespace dpmerf {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  int num_releases = 1;  // 1, or 2 when class counts are also released
};

inline void validate(const PrivacyBudget& b) {
  if (!(b.epsilon > 0.0)) throw InvalidConfig("epsilon must be > 0");
  if (!(b.delta > 0.0 && b.delta < 1.0))
    throw InvalidConfig("delta must lie in (0, 1)");
  if (b.num_releases != 1 && b.num_releases != 2)
    throw InvalidConfig("num_releases must be 1 or 2");
}

struct GaussianMechanismSpec {
  double sensitivity = 0.0;  // Delta
  double sigma = 0.0;        // noise multiplier; additive std is Delta * sigma
};

// A privatized mean embedding. Values are set once at construction; nothing
// downstream of a release touches raw data again.
struct EmbeddingRelease {
  Eigen::MatrixXd values;
  EmbeddingKind kind = EmbeddingKind::unlabeled;
  std::int64_t num_samples_m = 0;
  GaussianMechanismSpec spec;
  PrivacyBudget budget_consumed;
  std::uint64_t noise_seed = 0;
  bool weighted = false;
};

struct NoisyClassCounts {
  Eigen::VectorXd values;  // length C, may be nonpositive before clamping
  std::int64_t raw_total_m = 0;
};

// Renyi DP of a sensitivity-1 Gaussian mechanism with noise multiplier sigma.
inline double rdp_gaussian(double sigma, double alpha) {
  if (!(sigma > 0.0)) throw InvalidSigma("sigma must be > 0");
  if (!(alpha > 1.0)) throw InvalidOrder("alpha must be > 1");
  return alpha / (2.0 * sigma * sigma);
}

// The pinned accountant grid: 60 geometrically spaced orders in [1.05, 1024].
inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g(60);
    const double lo = 1.05, hi = 1024.0;
    for (int i = 0; i < 60; ++i)
      g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, i / 59.0);
    return g;
  }();
  return grid;
}

struct DpConversion {
  double epsilon = 0.0;
  double alpha_star = 0.0;  // grid order achieving the minimum
};

// RDP -> (epsilon, delta) conversion, minimized over the order grid:
//   eps(alpha) = eps_alpha + log(1 - 1/alpha) + (log(1/delta) - log alpha) / (alpha - 1)
// This is the standard tightened conversion used by current accountants; the
// plain eps_alpha + log(1/delta)/(alpha-1) rule is strictly looser and fails
// to match the classical Gaussian-mechanism calibration at epsilon <= 1.
inline DpConversion rdp_to_dp_detail(const std::function<double(double)>& rdp_total,
                                     const std::vector<double>& alpha_grid,
                                     double delta) {
  if (alpha_grid.empty()) throw EmptyGrid("alpha grid is empty");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidConfig("delta must lie in (0, 1)");
  DpConversion best;
  best.epsilon = std::numeric_limits<double>::infinity();
  for (double alpha : alpha_grid) {
    if (!(alpha > 1.0)) throw InvalidOrder("grid orders must be > 1");
    const double eps = rdp_total(alpha) + std::log1p(-1.0 / alpha) +
                       (std::log(1.0 / delta) - std::log(alpha)) / (alpha - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.alpha_star = alpha;
    }
  }
  best.epsilon = std::max(best.epsilon, 0.0);
  return best;
}

inline double rdp_to_dp(const std::function<double(double)>& rdp_total,
                        const std::vector<double>& alpha_grid, double delta) {
  return rdp_to_dp_detail(rdp_total, alpha_grid, delta).epsilon;
}

// (eps, delta) consumed by `num_releases` Gaussian mechanisms sharing one
// noise multiplier, via additive RDP composition.
inline DpConversion epsilon_for_sigma(double sigma, double delta, int num_releases) {
  return rdp_to_dp_detail(
      [sigma, num_releases](double alpha) {
        return num_releases * rdp_gaussian(sigma, alpha);
      },
      default_alpha_grid(), delta);
}

// Smallest noise multiplier (1e-4 relative) in [1e-2, 1e6] whose accounted
// epsilon stays within the budget. Both releases share the multiplier.
inline double calibrate_sigma(const PrivacyBudget& budget) {
  validate(budget);
  const auto eps_at = [&](double sigma) {
    return epsilon_for_sigma(sigma, budget.delta, budget.num_releases).epsilon;
  };
  double lo = 1e-2, hi = 1e6;
  if (eps_at(hi) > budget.epsilon)
    throw Unsatisfiable("epsilon " + std::to_string(budget.epsilon) +
                        " not reachable even at sigma = 1e6");
  if (eps_at(lo) <= budget.epsilon) return lo;
  while (hi - lo > 1e-4 * lo) {
    const double mid = std::sqrt(lo * hi);
    if (eps_at(mid) <= budget.epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Analytic L2 sensitivity of a mean embedding under replace-one neighbours.
inline double embedding_sensitivity(const MeanEmbedding& emb) {
  const double m = static_cast<double>(emb.num_samples_m);
  return (emb.kind == EmbeddingKind::hetero_labeled ? 2.0 * std::sqrt(2.0) : 2.0) / m;
}

inline constexpr double kClassCountSensitivity = 1.4142135623730951;  // sqrt(2)

// Gaussian mechanism on a mean embedding: adds N(0, (Delta sigma)^2) to every
// entry, with Delta = 2/m (unlabeled, labeled) or 2 sqrt(2)/m (hetero).
inline EmbeddingRelease privatize_embedding(
    const MeanEmbedding& emb, double sigma, std::uint64_t seed,
    std::optional<PrivacyBudget> budget = std::nullopt) {
  if (!(sigma > 0.0)) throw InvalidSigma("sigma must be > 0");
  if (emb.num_samples_m < 1) throw EmptyDataset("embedding has no samples");
  EmbeddingRelease rel;
  rel.kind = emb.kind;
  rel.num_samples_m = emb.num_samples_m;
  rel.spec.sensitivity = embedding_sensitivity(emb);
  rel.spec.sigma = sigma;
  rel.noise_seed = seed;
  if (budget) rel.budget_consumed = *budget;
  Eigen::MatrixXd noise(emb.values.rows(), emb.values.cols());
  SplitMix64 rng(seed);
  fill_gaussian(noise, rng, rel.spec.sensitivity * sigma);
  rel.values = emb.values + noise;
  return rel;
}

// Gaussian mechanism on the per-class count vector; replacing one record
// moves at most two counts by one, so Delta = sqrt(2).
inline NoisyClassCounts privatize_counts(const std::vector<std::int64_t>& counts,
                                         double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw InvalidSigma("sigma must be > 0");
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (counts.empty() || total < 1) throw EmptyDataset("counts must sum to >= 1");
  NoisyClassCounts out;
  out.raw_total_m = total;
  out.values.resize(static_cast<Eigen::Index>(counts.size()));
  SplitMix64 rng(seed);
  for (Eigen::Index c = 0; c < out.values.size(); ++c)
    out.values[c] = static_cast<double>(counts[static_cast<std::size_t>(c)]) +
                    kClassCountSensitivity * sigma * rng.next_gaussian();
  return out;
}

// Column c scaled by m / max(noisy_count_c, count_floor). The floor keeps
// noise-driven nonpositive counts from flipping or blowing up a column;
// scaling a release is post-processing and costs no budget.
inline EmbeddingRelease reweight_embedding(const EmbeddingRelease& release,
                                           const NoisyClassCounts& counts,
                                           double count_floor = 1.0) {
  if (release.kind == EmbeddingKind::unlabeled)
    throw ShapeMismatch("reweighting needs a labeled release");
  if (counts.values.size() != release.values.cols())
    throw ShapeMismatch("counts length " + std::to_string(counts.values.size()) +
                        " != " + std::to_string(release.values.cols()) + " columns");
  EmbeddingRelease out = release;
  const double m = static_cast<double>(counts.raw_total_m);
  for (Eigen::Index c = 0; c < out.values.cols(); ++c)
    out.values.col(c) *= m / std::max(counts.values[c], count_floor);
  out.weighted = true;
  return out;
}

// Upper bound on the expected absolute gap between the noisy random-feature
// MMD^2 and the exact-kernel MMD^2:
//   4 D sigma^2 / m^2 + (8 sqrt(2) sigma / m) Gamma((D+1)/2)/Gamma(D/2)
//   + 8 sqrt(2 pi / D).
inline double error_bound(int num_features, std::int64_t num_samples, double sigma) {
  if (num_features < 2 || num_features % 2 != 0)
    throw InvalidConfig("num_features must be even and >= 2");
  if (num_samples < 1) throw InvalidConfig("num_samples must be >= 1");
  if (sigma < 0.0) throw InvalidConfig("sigma must be >= 0");
  const double d = static_cast<double>(num_features);
  const double m = static_cast<double>(num_samples);
  const double gamma_ratio = std::exp(std::lgamma((d + 1.0) / 2.0) - std::lgamma(d / 2.0));
  return 4.0 * d * sigma * sigma / (m * m) +
         8.0 * std::sqrt(2.0) * sigma / m * gamma_ratio +
         8.0 * std::sqrt(2.0 * M_PI / d);
}

}  // namespace dpmerf
