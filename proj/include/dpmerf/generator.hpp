#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/data.hpp"
#include "dpmerf/embedding.hpp"
#include "dpmerf/errors.hpp"
#include "dpmerf/featuremap.hpp"
#include "dpmerf/privacy.hpp"
#include "dpmerf/rng.hpp"

namespace dpmerf {

enum class LabelDist { uniform, noisy_counts };

struct GeneratorArch {
  int latent_dim = 10;
  int num_classes = 0;          // 0 = unconditioned generator
  std::vector<int> hidden = {100, 100};
  int num_numerical = 0;        // logistic-squashed outputs
  std::vector<int> cat_blocks;  // one softmax head per block

  int input_dim() const { return latent_dim + num_classes; }
  int cat_width() const { return std::accumulate(cat_blocks.begin(), cat_blocks.end(), 0); }
  int output_dim() const { return num_numerical + cat_width(); }
};

inline void validate(const GeneratorArch& arch) {
  if (arch.latent_dim < 1) throw InvalidArch("latent_dim must be >= 1");
  if (arch.num_classes < 0) throw InvalidArch("num_classes must be >= 0");
  if (arch.num_numerical < 0) throw InvalidArch("num_numerical must be >= 0");
  if (arch.output_dim() < 1) throw InvalidArch("generator has no outputs");
  for (int h : arch.hidden)
    if (h < 1) throw InvalidArch("hidden widths must be >= 1");
  for (int b : arch.cat_blocks)
    if (b < 1) throw InvalidArch("categorical block widths must be >= 1");
}

// Fully-connected conditional generator: affine + ReLU hidden layers, then an
// affine output split into a logistic numerical head and per-block softmax
// categorical heads.
struct GeneratorParams {
  GeneratorArch arch;
  std::vector<Eigen::MatrixXd> weights;  // layer k: out x in
  std::vector<Eigen::VectorXd> biases;

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
    return n;
  }
};

// He init: weights ~ N(0, 2/fan_in), biases zero.
inline GeneratorParams init_generator(const GeneratorArch& arch, std::uint64_t seed) {
  validate(arch);
  GeneratorParams params;
  params.arch = arch;
  std::vector<int> widths;
  widths.push_back(arch.input_dim());
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.output_dim());

  SplitMix64 rng(seed);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const int fan_in = widths[k], fan_out = widths[k + 1];
    Eigen::MatrixXd w(fan_out, fan_in);
    fill_gaussian(w, rng, std::sqrt(2.0 / fan_in));
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return params;
}

namespace detail {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> post;  // activations per layer, batch-major
  Eigen::MatrixXd raw;                // pre-squash output, B x output_dim
  Eigen::MatrixXd squashed;           // B x output_dim
};

// Squash: logistic on the numerical head, softmax per categorical block.
// Optional gumbel noise (B x cat_width) shifts the block logits before the
// softmax, scaled by 1/temperature.
inline void squash_outputs(const GeneratorArch& arch, const Eigen::MatrixXd& raw,
                           const Eigen::MatrixXd* gumbel, double temperature,
                           Eigen::MatrixXd& out) {
  const int dn = arch.num_numerical;
  out.resize(raw.rows(), raw.cols());
  if (dn > 0)
    out.leftCols(dn) = (1.0 / (1.0 + (-raw.leftCols(dn)).array().exp())).matrix();
  int off = 0;
  for (int b : arch.cat_blocks) {
    Eigen::MatrixXd logits = raw.middleCols(dn + off, b);
    if (gumbel != nullptr)
      logits = (logits + gumbel->middleCols(off, b)) / temperature;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
      out.row(i).segment(dn + off, b) = (e / e.sum()).matrix().transpose();
    }
    off += b;
  }
}

inline ForwardCache forward_cached(const GeneratorParams& params,
                                   const Eigen::MatrixXd& z,
                                   const Eigen::MatrixXd& y_onehot,
                                   const Eigen::MatrixXd* gumbel,
                                   double temperature) {
  const GeneratorArch& arch = params.arch;
  if (z.cols() != arch.latent_dim) throw ShapeMismatch("latent batch has wrong width");
  if (arch.num_classes > 0) {
    if (y_onehot.cols() != arch.num_classes || y_onehot.rows() != z.rows())
      throw ShapeMismatch("label batch has wrong shape");
  }

  ForwardCache cache;
  Eigen::MatrixXd h(z.rows(), arch.input_dim());
  h.leftCols(arch.latent_dim) = z;
  if (arch.num_classes > 0) h.rightCols(arch.num_classes) = y_onehot;
  cache.post.push_back(h);

  const std::size_t layers = params.weights.size();
  for (std::size_t k = 0; k < layers; ++k) {
    Eigen::MatrixXd a = cache.post.back() * params.weights[k].transpose();
    a.rowwise() += params.biases[k].transpose();
    if (k + 1 < layers) a = a.cwiseMax(0.0);  // ReLU hidden
    cache.post.push_back(std::move(a));
  }
  cache.raw = cache.post.back();
  squash_outputs(arch, cache.raw, gumbel, temperature, cache.squashed);
  return cache;
}

}  // namespace detail

inline Eigen::MatrixXd forward(const GeneratorParams& params, const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& y_onehot = Eigen::MatrixXd()) {
  return detail::forward_cached(params, z, y_onehot, nullptr, 1.0).squashed;
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
};

struct GeneratorBatch {
  Eigen::MatrixXd z;            // B x latent_dim
  std::vector<int> labels;      // empty when unconditioned
  const Eigen::MatrixXd* gumbel = nullptr;
  double temperature = 1.0;
};

// Squared Frobenius distance between the released embedding (a constant) and
// the synthetic-batch mean embedding, with the gradient w.r.t. all generator
// parameters by reverse-mode propagation through the feature map, the output
// squashers and the affine layers. Soft categorical outputs feed the feature
// directly; `counts` only rides along for interface symmetry and is shape-
// checked when present.
inline LossAndGrad loss_and_grad(const GeneratorParams& params,
                                 const EmbeddingRelease& release,
                                 const NoisyClassCounts* counts,
                                 const FeatureMap& map,
                                 const GeneratorBatch& batch) {
  const GeneratorArch& arch = params.arch;
  const int num_cols = arch.num_classes > 0 ? arch.num_classes : 1;
  const int d_cat = arch.cat_width();
  const int d_eff = map.num_features + d_cat;
  const bool hetero = d_cat > 0;

  if (arch.num_numerical != map.input_dim())
    throw ShapeMismatch("feature map input dim != generator numerical width");
  if (release.values.rows() != d_eff || release.values.cols() != num_cols)
    throw ShapeMismatch("release shape does not match generator/map");
  if (arch.num_classes == 0 && hetero)
    throw ShapeMismatch("unconditioned generators support numerical outputs only");
  const EmbeddingKind want = arch.num_classes == 0 ? EmbeddingKind::unlabeled
                             : hetero ? EmbeddingKind::hetero_labeled
                                      : EmbeddingKind::labeled;
  if (release.kind != want)
    throw ShapeMismatch(std::string("release kind ") + to_string(release.kind) +
                        " does not match generator (" + to_string(want) + ")");
  if (counts != nullptr && counts->values.size() != num_cols)
    throw ShapeMismatch("counts length does not match class count");

  const Eigen::Index n = batch.z.rows();
  if (n < 1) throw ShapeMismatch("empty batch");
  Eigen::MatrixXd y_onehot;
  if (arch.num_classes > 0) {
    if (static_cast<Eigen::Index>(batch.labels.size()) != n)
      throw ShapeMismatch("batch labels size != batch size");
    y_onehot = Eigen::MatrixXd::Zero(n, arch.num_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = batch.labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= arch.num_classes) throw LabelOutOfRange("batch label out of range");
      y_onehot(i, y) = 1.0;
    }
  }

  auto cache = detail::forward_cached(params, batch.z, y_onehot, batch.gumbel,
                                      batch.temperature);
  const int dn = arch.num_numerical;
  const int half = map.num_features / 2;
  const double scale = std::sqrt(2.0 / map.num_features);
  const double cat_scale = hetero ? 1.0 / std::sqrt(static_cast<double>(d_cat)) : 0.0;

  // Per-sample features as columns and the synthetic mean embedding.
  const Eigen::MatrixXd args =
      map.frequencies * cache.squashed.leftCols(dn).transpose();  // D/2 x n
  Eigen::MatrixXd ca, sa;
  detail::cos_sin(args, ca, sa);

  Eigen::MatrixXd mu_q = Eigen::MatrixXd::Zero(d_eff, num_cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int col = arch.num_classes > 0 ? batch.labels[static_cast<std::size_t>(i)] : 0;
    mu_q.col(col).head(half) += scale * ca.col(i);
    mu_q.col(col).segment(half, half) += scale * sa.col(i);
    if (hetero)
      mu_q.col(col).tail(d_cat) += cat_scale * cache.squashed.row(i).tail(d_cat).transpose();
  }
  mu_q /= static_cast<double>(n);

  LossAndGrad out;
  const Eigen::MatrixXd diff = mu_q - release.values;
  out.loss = diff.squaredNorm();

  // d loss / d feature_i = (2/n) diff[:, y_i]; through the feature map,
  // d/d v of [scale cos(Wv); scale sin(Wv)] contracts to W^T per sample.
  const double gw = 2.0 / static_cast<double>(n);
  Eigen::MatrixXd d_args(half, n);
  Eigen::MatrixXd g_squash(n, arch.output_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int col = arch.num_classes > 0 ? batch.labels[static_cast<std::size_t>(i)] : 0;
    d_args.col(i) =
        scale * gw *
        (diff.col(col).segment(half, half).cwiseProduct(ca.col(i)) -
         diff.col(col).head(half).cwiseProduct(sa.col(i)));
    if (hetero)
      g_squash.row(i).tail(d_cat) =
          cat_scale * gw * diff.col(col).tail(d_cat).transpose();
  }
  g_squash.leftCols(dn) = (map.frequencies.transpose() * d_args).transpose();

  // Through the squashers to pre-activation gradients.
  Eigen::MatrixXd g_raw(n, arch.output_dim());
  if (dn > 0) {
    const auto v = cache.squashed.leftCols(dn).array();
    g_raw.leftCols(dn) = (g_squash.leftCols(dn).array() * v * (1.0 - v)).matrix();
  }
  int off = 0;
  for (int b : arch.cat_blocks) {
    const auto s = cache.squashed.middleCols(dn + off, b);
    const auto gs = g_squash.middleCols(dn + off, b);
    const Eigen::VectorXd dot = (s.array() * gs.array()).rowwise().sum();
    Eigen::MatrixXd gb = (s.array() * (gs.array().colwise() - dot.array())).matrix();
    if (batch.gumbel != nullptr) gb /= batch.temperature;
    g_raw.middleCols(dn + off, b) = gb;
    off += b;
  }

  // Affine / ReLU backward pass.
  const std::size_t layers = params.weights.size();
  out.d_weights.resize(layers);
  out.d_biases.resize(layers);
  Eigen::MatrixXd g = g_raw;
  for (std::size_t k = layers; k-- > 0;) {
    if (k + 1 < layers) {
      // ReLU mask on this layer's post-activation.
      g = (cache.post[k + 1].array() > 0.0).select(g, 0.0);
    }
    out.d_weights[k] = g.transpose() * cache.post[k];
    out.d_biases[k] = g.colwise().sum().transpose();
    if (k > 0) g = (g * params.weights[k]).eval();
  }
  return out;
}

struct TrainConfig {
  int steps = 2000;
  int batch_size = 500;
  double learning_rate = 1e-2;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;
  LabelDist label_dist = LabelDist::uniform;
  bool gumbel = false;
  double gumbel_temperature = 0.5;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.steps < 0) throw InvalidConfig("steps must be >= 0");
  if (cfg.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
  if (cfg.optimizer != "adam") throw InvalidConfig("unsupported optimizer '" + cfg.optimizer + "'");
  if (cfg.gumbel && !(cfg.gumbel_temperature > 0.0))
    throw InvalidConfig("gumbel_temperature must be > 0");
}

struct TrainResultGen {
  GeneratorParams params;
  std::vector<double> loss_trace;
};

namespace detail {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const GeneratorParams& p) {
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
      mw.push_back(Eigen::MatrixXd::Zero(p.weights[k].rows(), p.weights[k].cols()));
      vw.push_back(Eigen::MatrixXd::Zero(p.weights[k].rows(), p.weights[k].cols()));
      mb.push_back(Eigen::VectorXd::Zero(p.biases[k].size()));
      vb.push_back(Eigen::VectorXd::Zero(p.biases[k].size()));
    }
  }

  void update(GeneratorParams& p, const LossAndGrad& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
      mw[k] = b1 * mw[k] + (1.0 - b1) * g.d_weights[k];
      vw[k] = (b2 * vw[k].array() + (1.0 - b2) * g.d_weights[k].array().square()).matrix();
      p.weights[k].array() -=
          lr * (mw[k].array() / c1) / ((vw[k].array() / c2).sqrt() + eps);
      mb[k] = b1 * mb[k] + (1.0 - b1) * g.d_biases[k];
      vb[k] = (b2 * vb[k].array() + (1.0 - b2) * g.d_biases[k].array().square()).matrix();
      p.biases[k].array() -=
          lr * (mb[k].array() / c1) / ((vb[k].array() / c2).sqrt() + eps);
    }
  }
};

// Inverse-CDF draw over class probabilities.
inline int sample_class(SplitMix64& rng, const Eigen::VectorXd& probs) {
  const double u = rng.next_unit();
  double acc = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size() - 1);
}

inline Eigen::VectorXd label_probs(const GeneratorArch& arch, LabelDist dist,
                                   const NoisyClassCounts* counts) {
  const int c = arch.num_classes;
  if (dist == LabelDist::uniform || counts == nullptr)
    return Eigen::VectorXd::Constant(c, 1.0 / c);
  Eigen::VectorXd p = counts->values.cwiseMax(1.0);
  return p / p.sum();
}

}  // namespace detail

// Runs `steps` Adam iterations against the released embedding. Latents are
// standard normal; labels follow the configured distribution. Deterministic
// given config.seed.
inline TrainResultGen train(GeneratorParams params, const EmbeddingRelease& release,
                            const NoisyClassCounts* counts, const FeatureMap& map,
                            const TrainConfig& cfg) {
  validate(cfg);
  TrainResultGen result;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));

  SplitMix64 rng(cfg.seed);
  const int n = cfg.batch_size;
  Eigen::VectorXd probs;
  if (params.arch.num_classes > 0)
    probs = detail::label_probs(params.arch, cfg.label_dist, counts);

  detail::AdamState adam(params);
  Eigen::MatrixXd z(n, params.arch.latent_dim);
  Eigen::MatrixXd gumbel;
  for (int t = 0; t < cfg.steps; ++t) {
    GeneratorBatch batch;
    fill_gaussian(z, rng);
    batch.z = z;
    if (params.arch.num_classes > 0) {
      batch.labels.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        batch.labels[static_cast<std::size_t>(i)] = detail::sample_class(rng, probs);
    }
    if (cfg.gumbel && params.arch.cat_width() > 0) {
      gumbel.resize(n, params.arch.cat_width());
      for (Eigen::Index r = 0; r < gumbel.rows(); ++r)
        for (Eigen::Index c = 0; c < gumbel.cols(); ++c)
          gumbel(r, c) = -std::log(-std::log(rng.next_unit_open()));
      batch.gumbel = &gumbel;
      batch.temperature = cfg.gumbel_temperature;
    }
    const LossAndGrad lg = loss_and_grad(params, release, counts, map, batch);
    if (!std::isfinite(lg.loss))
      throw DivergedLoss("loss became non-finite at step " + std::to_string(t));
    adam.update(params, lg, cfg.learning_rate);
    result.loss_trace.push_back(lg.loss);
  }
  result.params = std::move(params);
  return result;
}

// Draws n synthetic rows: latent/label pairs through the generator, argmax
// hardening of categorical blocks, numericals de-normalized by the schema at
// CSV time (the Dataset stays in normalized form).
inline Dataset sample(const GeneratorParams& params, std::int64_t n,
                      const Eigen::VectorXd& label_probs, std::uint64_t seed,
                      const Schema& schema) {
  validate(schema);
  const GeneratorArch& arch = params.arch;
  if (schema.num_numerical() != arch.num_numerical)
    throw InvalidSchema("schema numerical width != generator output");
  const auto widths = schema.cat_block_widths();
  if (widths != arch.cat_blocks)
    throw InvalidSchema("schema categorical blocks != generator heads");
  if (!schema.stats_fitted)
    throw InvalidSchema("schema carries no normalization statistics");
  const int num_classes = schema.num_classes();
  if (label_probs.size() != num_classes)
    throw InvalidSchema("label distribution length != number of classes");
  if (n < 0) throw InvalidConfig("sample count must be >= 0");

  Dataset ds;
  ds.schema = schema;
  ds.provenance = "synthetic";
  ds.x_num.resize(n, arch.num_numerical);
  ds.x_cat.resize(n, arch.cat_width());
  ds.x_cat.setZero();
  ds.labels.resize(static_cast<std::size_t>(n));
  if (n == 0) return ds;

  SplitMix64 rng(seed);
  Eigen::MatrixXd z(n, arch.latent_dim);
  fill_gaussian(z, rng);
  Eigen::MatrixXd y_onehot;
  if (arch.num_classes > 0) y_onehot = Eigen::MatrixXd::Zero(n, arch.num_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = detail::sample_class(rng, label_probs);
    ds.labels[static_cast<std::size_t>(i)] = y;
    if (arch.num_classes > 0) y_onehot(i, y) = 1.0;
  }

  const Eigen::MatrixXd out = forward(params, z, y_onehot);
  ds.x_num = out.leftCols(arch.num_numerical);
  int off = 0;
  for (int b : arch.cat_blocks) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      out.row(i).segment(arch.num_numerical + off, b).maxCoeff(&best);
      ds.x_cat(i, off + best) = 1.0;
    }
    off += b;
  }
  return ds;
}

}  // namespace dpmerf
