#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dpmerf/model_io.hpp"

using namespace dpmerf;
namespace fs = std::filesystem;

namespace {

ModelFile tiny_model() {
  ModelFile m;
  m.mode = Mode::hetero;
  m.map = sample_frequencies(2, 12, 0.37, 991);

  ColumnSpec n1{"a", ColumnKind::numerical, {}, -3.0, 14.5};
  ColumnSpec n2{"b", ColumnKind::numerical, {}, 0.0, 1.0};
  ColumnSpec c1{"c", ColumnKind::categorical, {"x", "y", "z"}, 0.0, 1.0};
  ColumnSpec lab{"y", ColumnKind::label, {"n", "p"}, 0.0, 1.0};
  m.schema.columns = {n1, n2, c1, lab};
  m.schema.stats_fitted = true;

  GeneratorArch arch;
  arch.latent_dim = 5;
  arch.num_classes = 2;
  arch.hidden = {7, 6};
  arch.num_numerical = 2;
  arch.cat_blocks = {3};
  m.params = init_generator(arch, 992);

  m.release.kind = EmbeddingKind::hetero_labeled;
  m.release.num_samples_m = 1234;
  m.release.spec = {2.0 * std::sqrt(2.0) / 1234.0, 5.67};
  m.release.budget_consumed = {1.0, 1e-5, 2};
  m.release.noise_seed = 993;
  m.release.weighted = true;
  m.release.values.resize(15, 2);
  SplitMix64 rng(994);
  fill_gaussian(m.release.values, rng);

  NoisyClassCounts counts;
  counts.raw_total_m = 1234;
  counts.values.resize(2);
  counts.values << 1000.2, 233.8;
  m.counts = counts;

  m.label_dist = LabelDist::noisy_counts;
  m.label_probs.resize(2);
  m.label_probs << 0.81, 0.19;
  return m;
}

}  // namespace

TEST_CASE("model file round trips bit-exactly", "[model_io]") {
  const fs::path dir = fs::temp_directory_path() / "dpmerf_model_tests";
  fs::create_directories(dir);
  const fs::path path = dir / "model.bin";

  const ModelFile m = tiny_model();
  save_model(m, path.string());
  const ModelFile r = load_model(path.string());

  CHECK(r.mode == m.mode);
  CHECK(r.map.frequencies == m.map.frequencies);
  CHECK(r.map.bandwidth == m.map.bandwidth);
  CHECK(r.map.seed == m.map.seed);
  CHECK(r.map.num_features == m.map.num_features);

  REQUIRE(r.schema.columns.size() == m.schema.columns.size());
  for (std::size_t i = 0; i < m.schema.columns.size(); ++i) {
    CHECK(r.schema.columns[i].name == m.schema.columns[i].name);
    CHECK(r.schema.columns[i].kind == m.schema.columns[i].kind);
    CHECK(r.schema.columns[i].levels == m.schema.columns[i].levels);
    CHECK(r.schema.columns[i].min == m.schema.columns[i].min);
    CHECK(r.schema.columns[i].max == m.schema.columns[i].max);
  }

  REQUIRE(r.params.weights.size() == m.params.weights.size());
  for (std::size_t k = 0; k < m.params.weights.size(); ++k) {
    CHECK(r.params.weights[k] == m.params.weights[k]);
    CHECK(r.params.biases[k] == m.params.biases[k]);
  }

  CHECK(r.release.values == m.release.values);
  CHECK(r.release.spec.sensitivity == m.release.spec.sensitivity);
  CHECK(r.release.spec.sigma == m.release.spec.sigma);
  CHECK(r.release.budget_consumed.epsilon == m.release.budget_consumed.epsilon);
  CHECK(r.release.budget_consumed.num_releases == 2);
  CHECK(r.release.weighted == m.release.weighted);
  REQUIRE(r.counts.has_value());
  CHECK(r.counts->values == m.counts->values);
  CHECK(r.counts->raw_total_m == m.counts->raw_total_m);
  CHECK(r.label_probs == m.label_probs);
  CHECK(r.label_dist == m.label_dist);

  // Sampling after a reload reproduces the original bits.
  const Dataset a = sample(m.params, 200, m.label_probs, 4242, m.schema);
  const Dataset b = sample(r.params, 200, r.label_probs, 4242, r.schema);
  CHECK(a.x_num == b.x_num);
  CHECK(a.x_cat == b.x_cat);
  CHECK(a.labels == b.labels);
}

TEST_CASE("version and magic mismatches are detected", "[model_io]") {
  const fs::path dir = fs::temp_directory_path() / "dpmerf_model_tests";
  fs::create_directories(dir);
  const fs::path path = dir / "patched.bin";
  save_model(tiny_model(), path.string());

  // Bump the version field (bytes 8..11).
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  CHECK_THROWS_AS(load_model(path.string()), ModelVersionMismatch);

  // Corrupt the magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("NOPE", 4);
  }
  CHECK_THROWS_AS(load_model(path.string()), ParseError);
  CHECK_THROWS_AS(load_model((dir / "missing.bin").string()), ParseError);
}
