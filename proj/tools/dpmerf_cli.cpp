// dpmerf command line: make-gaussians, calibrate, train, sample, evaluate,
// bound. Exit codes: 0 ok, 2 bad config/input, 3 unsatisfiable budget,
// 4 model file version mismatch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpmerf/data.hpp"
#include "dpmerf/eval.hpp"
#include "dpmerf/model_io.hpp"
#include "dpmerf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dpmerf;

namespace {

// Flat key=value config with [section] headers; sections are organizational,
// keys are globally unique and match the CLI flag names without the dashes.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("config line without '=': " + t);
    kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidConfig("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::string token;
  std::istringstream ss(v);
  while (ss >> token) {
    std::istringstream ts(token);
    std::string part;
    while (std::getline(ts, part, ','))
      if (!part.empty()) out.push_back(std::stoi(part));
  }
  return out;
}

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& v) {
  try {
    if (key == "mode") cfg.mode = mode_from_string(v);
    else if (key == "epsilon") cfg.epsilon = std::stod(v);
    else if (key == "delta") cfg.delta = std::stod(v);
    else if (key == "num-features") cfg.num_features = std::stoi(v);
    else if (key == "bandwidth") cfg.bandwidth = std::stod(v);
    else if (key == "median-heuristic") cfg.median_heuristic = parse_bool(key, v);
    else if (key == "median-max-pairs") cfg.median_max_pairs = std::stoll(v);
    else if (key == "latent-dim") cfg.latent_dim = std::stoi(v);
    else if (key == "hidden") cfg.hidden = parse_int_list(v);
    else if (key == "steps") cfg.steps = std::stoi(v);
    else if (key == "batch-size") cfg.batch_size = std::stoi(v);
    else if (key == "learning-rate") cfg.learning_rate = std::stod(v);
    else if (key == "optimizer") cfg.optimizer = v;
    else if (key == "gumbel") cfg.gumbel = parse_bool(key, v);
    else if (key == "gumbel-temperature") cfg.gumbel_temperature = std::stod(v);
    else if (key == "undersample-rate") cfg.undersample_rate = std::stod(v);
    else if (key == "seed-map") cfg.seed_map = std::stoull(v);
    else if (key == "seed-noise") cfg.seed_noise = std::stoull(v);
    else if (key == "seed-train") cfg.seed_train = std::stoull(v);
    else if (key == "seed-sample") cfg.seed_sample = std::stoull(v);
    else if (key == "data") cfg.data_path = v;
    else if (key == "schema") cfg.schema_path = v;
    else if (key == "out-dir") cfg.out_dir = v;
    else if (key == "num-samples") cfg.num_samples = std::stoll(v);
    else throw InvalidConfig("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw InvalidConfig("config key '" + key + "' has a bad value '" + v + "'");
  } catch (const std::out_of_range&) {
    throw InvalidConfig("config key '" + key + "' has a bad value '" + v + "'");
  }
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const Unsatisfiable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ModelVersionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DP-MERF: differentially private data generation via random-feature mean embeddings"};
  app.require_subcommand(1);

  struct {
    std::string out_dir;
    std::uint64_t seed = 1;
    GridMixtureConfig cfg;
  } mg;
  auto* mk = app.add_subcommand("make-gaussians", "Write the 2-D grid-mixture benchmark");
  mk->add_option("--out-dir", mg.out_dir)->required();
  mk->add_option("--seed", mg.seed);
  mk->add_option("--spacing", mg.cfg.spacing);
  mk->add_option("--component-std", mg.cfg.component_std);
  mk->add_option("--samples-per-component", mg.cfg.samples_per_component);
  mk->add_option("--test-fraction", mg.cfg.test_fraction);

  struct {
    double epsilon = 1.0;
    double delta = 1e-5;
    int releases = 1;
  } ca;
  auto* cal = app.add_subcommand("calibrate", "Noise multiplier for an (epsilon, delta) budget");
  cal->add_option("--epsilon", ca.epsilon)->required();
  cal->add_option("--delta", ca.delta)->required();
  cal->add_option("--releases", ca.releases);

  RunConfig tcfg;
  std::string config_path;
  std::string mode_str;
  auto* tr = app.add_subcommand("train", "Release the private embedding and train a generator");
  tr->add_option("--config", config_path, "key=value config file; flags override");
  tr->add_option("--data", tcfg.data_path);
  tr->add_option("--schema", tcfg.schema_path);
  tr->add_option("--out-dir", tcfg.out_dir);
  tr->add_option("--mode", mode_str, "unlabeled | balanced | imbalanced | hetero");
  tr->add_option("--epsilon", tcfg.epsilon);
  tr->add_option("--delta", tcfg.delta);
  tr->add_option("--num-features", tcfg.num_features);
  tr->add_option("--bandwidth", tcfg.bandwidth);
  tr->add_flag("--median-heuristic", tcfg.median_heuristic);
  tr->add_option("--median-max-pairs", tcfg.median_max_pairs);
  tr->add_option("--latent-dim", tcfg.latent_dim);
  tr->add_option("--hidden", tcfg.hidden)->delimiter(',');
  tr->add_option("--steps", tcfg.steps);
  tr->add_option("--batch-size", tcfg.batch_size);
  tr->add_option("--learning-rate", tcfg.learning_rate);
  tr->add_option("--optimizer", tcfg.optimizer);
  tr->add_flag("--gumbel", tcfg.gumbel);
  tr->add_option("--gumbel-temperature", tcfg.gumbel_temperature);
  tr->add_option("--undersample-rate", tcfg.undersample_rate);
  tr->add_option("--seed-map", tcfg.seed_map);
  tr->add_option("--seed-noise", tcfg.seed_noise);
  tr->add_option("--seed-train", tcfg.seed_train);
  tr->add_option("--seed-sample", tcfg.seed_sample);

  struct {
    std::string model_path;
    std::string out_path;
    std::int64_t num_samples = 1000;
    std::uint64_t seed = 4;
  } sa;
  auto* sm = app.add_subcommand("sample", "Draw synthetic rows from a trained model");
  sm->add_option("--model", sa.model_path)->required();
  sm->add_option("--out", sa.out_path)->required();
  sm->add_option("--num-samples", sa.num_samples);
  sm->add_option("--seed", sa.seed);

  struct {
    std::string synthetic_path;
    std::string test_path;
    std::string schema_path;
    std::string classifier = "both";
    std::string csv_out;
    std::uint64_t seed = 1;
    bool mixture = false;
    GridMixtureConfig mix_cfg;
    int min_hits = 10;
    double radius_sigmas = 3.0;
  } ea;
  auto* ev = app.add_subcommand("evaluate", "Classifier transfer and mixture metrics");
  ev->add_option("--synthetic", ea.synthetic_path)->required();
  ev->add_option("--test", ea.test_path)->required();
  ev->add_option("--schema", ea.schema_path)->required();
  ev->add_option("--classifier", ea.classifier, "logreg | nearest-centroid | both");
  ev->add_option("--csv", ea.csv_out);
  ev->add_option("--seed", ea.seed);
  ev->add_flag("--mixture", ea.mixture, "also report NLL and mode coverage");
  ev->add_option("--mixture-spacing", ea.mix_cfg.spacing);
  ev->add_option("--mixture-std", ea.mix_cfg.component_std);
  ev->add_option("--min-hits", ea.min_hits);
  ev->add_option("--radius-sigmas", ea.radius_sigmas);

  struct {
    int num_features = 1000;
    std::int64_t num_samples = 1000;
    double sigma = 1.0;
  } ba;
  auto* bd = app.add_subcommand("bound", "Expected-absolute-error bound on the noisy objective");
  bd->add_option("--num-features", ba.num_features)->required();
  bd->add_option("--num-samples", ba.num_samples)->required();
  bd->add_option("--sigma", ba.sigma)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (mk->parsed())
    return run_guarded([&] {
      if (mg.out_dir.empty()) throw InvalidConfig("out-dir is required");
      fs::create_directories(mg.out_dir);
      const MixtureSplit split = make_gaussian_grid(mg.seed, mg.cfg);
      write_csv(split.train, (fs::path(mg.out_dir) / "gauss_train.csv").string());
      write_csv(split.test, (fs::path(mg.out_dir) / "gauss_test.csv").string());
      Schema file_schema = split.train.schema;
      file_schema.stats_fitted = false;
      write_schema_file(file_schema, (fs::path(mg.out_dir) / "gauss.schema").string());
      std::cout << "train=" << split.train.size() << " test=" << split.test.size()
                << " out-dir=" << mg.out_dir << "\n";
      return 0;
    });

  if (cal->parsed())
    return run_guarded([&] {
      const PrivacyBudget budget{ca.epsilon, ca.delta, ca.releases};
      const double sigma = calibrate_sigma(budget);
      const DpConversion conv = epsilon_for_sigma(sigma, ca.delta, ca.releases);
      std::printf("sigma=%.10g\n", sigma);
      std::printf("epsilon-achieved=%.10g\n", conv.epsilon);
      std::printf("alpha-star=%.10g\n", conv.alpha_star);
      std::printf("grid=%zu geometric orders in [%.10g, %.10g]\n",
                  default_alpha_grid().size(), default_alpha_grid().front(),
                  default_alpha_grid().back());
      return 0;
    });

  if (tr->parsed())
    return run_guarded([&] {
      RunConfig cfg;
      if (!config_path.empty())
        for (const auto& [k, v] : read_config_file(config_path))
          apply_config_key(cfg, k, v);
      // Command-line flags override file values.
      const auto given = [&](const char* flag) { return tr->count(flag) > 0; };
      if (given("--data")) cfg.data_path = tcfg.data_path;
      if (given("--schema")) cfg.schema_path = tcfg.schema_path;
      if (given("--out-dir")) cfg.out_dir = tcfg.out_dir;
      if (given("--mode")) cfg.mode = mode_from_string(mode_str);
      if (given("--epsilon")) cfg.epsilon = tcfg.epsilon;
      if (given("--delta")) cfg.delta = tcfg.delta;
      if (given("--num-features")) cfg.num_features = tcfg.num_features;
      if (given("--bandwidth")) cfg.bandwidth = tcfg.bandwidth;
      if (given("--median-heuristic")) cfg.median_heuristic = tcfg.median_heuristic;
      if (given("--median-max-pairs")) cfg.median_max_pairs = tcfg.median_max_pairs;
      if (given("--latent-dim")) cfg.latent_dim = tcfg.latent_dim;
      if (given("--hidden")) cfg.hidden = tcfg.hidden;
      if (given("--steps")) cfg.steps = tcfg.steps;
      if (given("--batch-size")) cfg.batch_size = tcfg.batch_size;
      if (given("--learning-rate")) cfg.learning_rate = tcfg.learning_rate;
      if (given("--optimizer")) cfg.optimizer = tcfg.optimizer;
      if (given("--gumbel")) cfg.gumbel = tcfg.gumbel;
      if (given("--gumbel-temperature")) cfg.gumbel_temperature = tcfg.gumbel_temperature;
      if (given("--undersample-rate")) cfg.undersample_rate = tcfg.undersample_rate;
      if (given("--seed-map")) cfg.seed_map = tcfg.seed_map;
      if (given("--seed-noise")) cfg.seed_noise = tcfg.seed_noise;
      if (given("--seed-train")) cfg.seed_train = tcfg.seed_train;
      if (given("--seed-sample")) cfg.seed_sample = tcfg.seed_sample;

      const TrainOutcome out = run_train(cfg, std::cerr);
      std::printf("model=%s\n", out.model_path.c_str());
      std::printf("sigma=%.10g\n", out.sigma);
      std::printf("epsilon-achieved=%.10g\n", out.eps_achieved);
      std::printf("sensitivity=%.10g\n", out.sensitivity);
      std::printf("num-releases=%d\n", out.num_releases);
      std::printf("final-loss=%.10g\n",
                  out.loss_trace.empty() ? 0.0 : out.loss_trace.back());
      std::printf("data-reads-after-release=%llu\n",
                  static_cast<unsigned long long>(out.rows_read_final -
                                                  out.rows_read_at_release));
      return 0;
    });

  if (sm->parsed())
    return run_guarded([&] {
      const ModelFile model = load_model(sa.model_path);
      const Dataset ds = sample_from_model(model, sa.num_samples, sa.seed);
      write_csv(ds, sa.out_path);
      std::cout << "rows=" << ds.size() << " out=" << sa.out_path << "\n";
      return 0;
    });

  if (ev->parsed())
    return run_guarded([&] {
      const Dataset train = load_tabular(ea.synthetic_path, ea.schema_path);
      const Dataset test = load_tabular(ea.test_path, train.schema);

      std::vector<EvalReport> reports;
      if (ea.classifier != "logreg" && ea.classifier != "nearest-centroid" &&
          ea.classifier != "both")
        throw InvalidConfig("classifier must be logreg, nearest-centroid or both");
      if (ea.classifier == "logreg" || ea.classifier == "both") {
        const auto r = train_eval_classifier(train, test, ClassifierKind::logreg, ea.seed);
        reports.insert(reports.end(), r.begin(), r.end());
      }
      if (ea.classifier == "nearest-centroid" || ea.classifier == "both") {
        const auto r =
            train_eval_classifier(train, test, ClassifierKind::nearest_centroid, ea.seed);
        reports.insert(reports.end(), r.begin(), r.end());
      }
      if (ea.mixture) {
        const GridMixture mix = GridMixture::make(ea.mix_cfg);
        reports.push_back({"nll", nll(train, mix), "-", ea.seed});
        reports.push_back({"nll_real_test", nll(test, mix), "-", ea.seed});
        reports.push_back({"mode_coverage",
                           mode_coverage(train, mix, ea.min_hits, ea.radius_sigmas), "-",
                           ea.seed});
      }
      for (const auto& r : reports)
        std::printf("metric=%s value=%.10g classifier=%s seed=%llu\n", r.metric.c_str(),
                    r.value, r.classifier.c_str(),
                    static_cast<unsigned long long>(r.seed));
      if (!ea.csv_out.empty()) {
        std::ofstream out(ea.csv_out);
        out << "metric,value,classifier,seed\n";
        for (const auto& r : reports)
          out << r.metric << ',' << r.value << ',' << r.classifier << ',' << r.seed << "\n";
      }
      return 0;
    });

  if (bd->parsed())
    return run_guarded([&] {
      std::printf("bound=%.10g\n", error_bound(ba.num_features, ba.num_samples, ba.sigma));
      return 0;
    });
  return 2;
}
