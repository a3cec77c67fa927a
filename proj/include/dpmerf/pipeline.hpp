#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpmerf/data.hpp"
#include "dpmerf/embedding.hpp"
#include "dpmerf/errors.hpp"
#include "dpmerf/eval.hpp"
#include "dpmerf/featuremap.hpp"
#include "dpmerf/generator.hpp"
#include "dpmerf/model_io.hpp"
#include "dpmerf/privacy.hpp"

namespace dpmerf {

// Every knob of a run, with defaults. The CLI mirrors these names in
// kebab-case and echoes the resolved values next to the outputs.
struct RunConfig {
  Mode mode = Mode::balanced;

  // privacy
  double epsilon = 1.0;
  double delta = 1e-5;

  // feature map
  int num_features = 1000;
  double bandwidth = 0.0;  // must be set unless median_heuristic is on
  bool median_heuristic = false;
  std::int64_t median_max_pairs = 10000;

  // generator + training
  int latent_dim = 10;
  std::vector<int> hidden = {100, 100};
  int steps = 2000;
  int batch_size = 500;
  double learning_rate = 1e-2;
  std::string optimizer = "adam";
  bool gumbel = false;
  double gumbel_temperature = 0.5;

  // data handling
  double undersample_rate = 1.0;

  // seeds
  std::uint64_t seed_map = 1;
  std::uint64_t seed_noise = 2;
  std::uint64_t seed_train = 3;
  std::uint64_t seed_sample = 4;

  // paths
  std::string data_path;
  std::string schema_path;
  std::string out_dir;

  // sampling
  std::int64_t num_samples = 1000;
};

inline void validate_train_config(const RunConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw InvalidConfig("epsilon must be > 0");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InvalidConfig("delta must lie in (0, 1)");
  if (cfg.num_features < 2 || cfg.num_features % 2 != 0)
    throw InvalidConfig("num-features must be a positive even integer");
  if (!cfg.median_heuristic && !(cfg.bandwidth > 0.0))
    throw InvalidConfig("bandwidth must be > 0 (or enable median-heuristic)");
  if (cfg.data_path.empty()) throw InvalidConfig("data path is required");
  if (cfg.schema_path.empty()) throw InvalidConfig("schema path is required");
  if (cfg.out_dir.empty()) throw InvalidConfig("out-dir is required");
  if (!(cfg.undersample_rate > 0.0 && cfg.undersample_rate <= 1.0))
    throw InvalidConfig("undersample-rate must lie in (0, 1]");
  if (cfg.steps < 0) throw InvalidConfig("steps must be >= 0");
  if (cfg.batch_size < 1) throw InvalidConfig("batch-size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("learning-rate must be > 0");
  if (cfg.latent_dim < 1) throw InvalidConfig("latent-dim must be >= 1");
}

struct TrainOutcome {
  double sigma = 0.0;
  double eps_achieved = 0.0;
  double alpha_star = 0.0;
  double sensitivity = 0.0;
  int num_releases = 1;
  double bandwidth = 0.0;
  std::int64_t num_samples_m = 0;
  std::vector<double> loss_trace;
  std::uint64_t rows_read_at_release = 0;
  std::uint64_t rows_read_final = 0;
  std::string model_path;
  ModelFile model;
};

namespace detail {

inline std::string config_echo(const RunConfig& c, const TrainOutcome& o) {
  std::ostringstream s;
  s << "[run]\n"
    << "mode=" << to_string(c.mode) << "\n"
    << "data=" << c.data_path << "\n"
    << "schema=" << c.schema_path << "\n"
    << "out-dir=" << c.out_dir << "\n"
    << "[privacy]\n"
    << "epsilon=" << c.epsilon << "\n"
    << "delta=" << c.delta << "\n"
    << "[features]\n"
    << "num-features=" << c.num_features << "\n"
    << "bandwidth=" << o.bandwidth << "\n"
    << "median-heuristic=" << (c.median_heuristic ? "true" : "false") << "\n"
    << "median-max-pairs=" << c.median_max_pairs << "\n"
    << "[generator]\n"
    << "latent-dim=" << c.latent_dim << "\n";
  s << "hidden=";
  for (std::size_t i = 0; i < c.hidden.size(); ++i)
    s << c.hidden[i] << (i + 1 < c.hidden.size() ? " " : "");
  s << "\n"
    << "steps=" << c.steps << "\n"
    << "batch-size=" << c.batch_size << "\n"
    << "learning-rate=" << c.learning_rate << "\n"
    << "optimizer=" << c.optimizer << "\n"
    << "gumbel=" << (c.gumbel ? "true" : "false") << "\n"
    << "gumbel-temperature=" << c.gumbel_temperature << "\n"
    << "[data]\n"
    << "undersample-rate=" << c.undersample_rate << "\n"
    << "[seeds]\n"
    << "seed-map=" << c.seed_map << "\n"
    << "seed-noise=" << c.seed_noise << "\n"
    << "seed-train=" << c.seed_train << "\n"
    << "seed-sample=" << c.seed_sample << "\n";
  return s.str();
}

}  // namespace detail

// The training pipeline: load data once, build the frozen feature map,
// compute the mean embedding, release it (and the class counts in the
// two-release modes) with a jointly calibrated noise multiplier, then train
// the generator against the released values only. The data file is never
// read again after the releases; the outcome records the reader counters at
// both points so callers can check.
inline TrainOutcome run_train(const RunConfig& cfg, std::ostream& log = std::cerr) {
  validate_train_config(cfg);

  Dataset ds = load_tabular(cfg.data_path, cfg.schema_path);
  if (cfg.undersample_rate < 1.0)
    ds = undersample(ds, cfg.undersample_rate, derive_seed(cfg.seed_train, 99));
  const std::int64_t m = ds.size();
  if (cfg.delta >= 1.0 / static_cast<double>(m))
    log << "warning: delta=" << cfg.delta << " is not below 1/m=" << 1.0 / static_cast<double>(m)
        << "; consider a smaller delta\n";

  const int d_num = ds.schema.num_numerical();
  const int d_cat = ds.schema.onehot_width();
  if (d_num < 1) throw InvalidConfig("pipeline needs at least one numerical column");
  if (cfg.mode != Mode::hetero && d_cat > 0)
    throw InvalidConfig("data has categorical columns; use mode=hetero");
  if (cfg.mode == Mode::hetero && d_cat == 0)
    throw InvalidConfig("mode=hetero needs at least one categorical column");

  TrainOutcome out;
  out.bandwidth = cfg.bandwidth;
  if (cfg.median_heuristic) {
    out.bandwidth = median_heuristic_bandwidth(ds.x_num, cfg.median_max_pairs,
                                               derive_seed(cfg.seed_map, 7));
    log << "warning: bandwidth " << out.bandwidth
        << " was estimated from the data by the median heuristic; this step is"
           " not privatized and is excluded from the stated budget\n";
  }
  const FeatureMap map =
      sample_frequencies(d_num, cfg.num_features, out.bandwidth, cfg.seed_map);

  // Embedding of the training data (the only data-dependent quantity).
  const int num_classes = ds.schema.num_classes();
  MeanEmbedding emb;
  if (cfg.mode == Mode::unlabeled) {
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i)
      pts[static_cast<std::size_t>(i)] = ds.x_num.row(i).transpose();
    emb = mean_embedding(pts, map);
  } else {
    emb = labeled_mean_embedding(ds.to_labeled_points(), map, num_classes);
  }

  const bool two_releases = cfg.mode == Mode::imbalanced || cfg.mode == Mode::hetero;
  out.num_releases = two_releases ? 2 : 1;
  PrivacyBudget budget{cfg.epsilon, cfg.delta, out.num_releases};
  out.sigma = calibrate_sigma(budget);
  const DpConversion conv = epsilon_for_sigma(out.sigma, cfg.delta, out.num_releases);
  out.eps_achieved = conv.epsilon;
  out.alpha_star = conv.alpha_star;
  out.num_samples_m = m;

  // Algorithm steps: release the embedding, then (two-release modes) release
  // the class counts and build the reweighted embedding.
  EmbeddingRelease release = privatize_embedding(emb, out.sigma, cfg.seed_noise, budget);
  out.sensitivity = release.spec.sensitivity;
  std::optional<NoisyClassCounts> counts;
  if (two_releases) {
    counts = privatize_counts(ds.class_counts(), out.sigma, derive_seed(cfg.seed_noise, 1));
    release = reweight_embedding(release, *counts);
  }
  const std::uint64_t reads_at_release = io_stats().rows_read.load();
  out.rows_read_at_release = reads_at_release;

  // Generator training sees only the release.
  GeneratorArch arch;
  arch.latent_dim = cfg.latent_dim;
  arch.num_classes = cfg.mode == Mode::unlabeled ? 0 : num_classes;
  arch.hidden = cfg.hidden;
  arch.num_numerical = d_num;
  arch.cat_blocks = ds.schema.cat_block_widths();

  GeneratorParams params = init_generator(arch, derive_seed(cfg.seed_train, 0));
  TrainConfig tcfg;
  tcfg.steps = cfg.steps;
  tcfg.batch_size = cfg.batch_size;
  tcfg.learning_rate = cfg.learning_rate;
  tcfg.optimizer = cfg.optimizer;
  tcfg.seed = derive_seed(cfg.seed_train, 1);
  tcfg.label_dist = two_releases ? LabelDist::noisy_counts : LabelDist::uniform;
  tcfg.gumbel = cfg.gumbel;
  tcfg.gumbel_temperature = cfg.gumbel_temperature;
  TrainResultGen tr = train(std::move(params), release,
                            counts ? &*counts : nullptr, map, tcfg);
  out.loss_trace = std::move(tr.loss_trace);
  out.rows_read_final = io_stats().rows_read.load();

  ModelFile model;
  model.mode = cfg.mode;
  model.map = map;
  model.schema = ds.schema;
  model.params = std::move(tr.params);
  model.release = std::move(release);
  model.counts = std::move(counts);
  model.label_dist = tcfg.label_dist;
  if (model.label_dist == LabelDist::noisy_counts && model.counts)
    model.label_probs = detail::label_probs(arch, model.label_dist, &*model.counts);
  else
    model.label_probs = Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  out.model_path = (fs::path(cfg.out_dir) / "model.bin").string();
  save_model(model, out.model_path);

  {
    std::ofstream echo(fs::path(cfg.out_dir) / "config.echo");
    echo << detail::config_echo(cfg, out);
  }
  {
    std::ofstream trace(fs::path(cfg.out_dir) / "trace.csv");
    trace << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < out.loss_trace.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, out.loss_trace[i]);
      trace << buf;
    }
  }
  {
    std::ofstream report(fs::path(cfg.out_dir) / "report.txt");
    const auto kv = [&report](const char* key, double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      report << key << '=' << buf << '\n';
    };
    report << "mode=" << to_string(cfg.mode) << '\n';
    report << "m=" << out.num_samples_m << '\n';
    report << "num-features=" << cfg.num_features << '\n';
    kv("bandwidth", out.bandwidth);
    kv("sensitivity", out.sensitivity);
    kv("sigma", out.sigma);
    kv("epsilon-budget", cfg.epsilon);
    kv("epsilon-achieved", out.eps_achieved);
    kv("alpha-star", out.alpha_star);
    kv("delta", cfg.delta);
    report << "num-releases=" << out.num_releases << '\n';
    report << "rows-read-at-release=" << out.rows_read_at_release << '\n';
    report << "rows-read-final=" << out.rows_read_final << '\n';
    report << "data-reads-after-release="
           << out.rows_read_final - out.rows_read_at_release << '\n';
    kv("final-loss", out.loss_trace.empty() ? 0.0 : out.loss_trace.back());
  }

  out.model = std::move(model);
  return out;
}

// Sampling from a stored model.
inline Dataset sample_from_model(const ModelFile& model, std::int64_t n,
                                 std::uint64_t seed) {
  return sample(model.params, n, model.label_probs, seed, model.schema);
}

}  // namespace dpmerf
