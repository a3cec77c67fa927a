#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dpmerf/data.hpp"
#include "dpmerf/errors.hpp"
#include "dpmerf/featuremap.hpp"
#include "dpmerf/generator.hpp"
#include "dpmerf/privacy.hpp"

namespace dpmerf {

enum class Mode { unlabeled, balanced, imbalanced, hetero };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::unlabeled: return "unlabeled";
    case Mode::balanced: return "balanced";
    case Mode::imbalanced: return "imbalanced";
    case Mode::hetero: return "hetero";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "unlabeled") return Mode::unlabeled;
  if (s == "balanced") return Mode::balanced;
  if (s == "imbalanced") return Mode::imbalanced;
  if (s == "hetero") return Mode::hetero;
  throw InvalidConfig("unknown mode '" + s + "'");
}

// Everything needed to reproduce sample() bit-for-bit: feature map, fitted
// schema, generator architecture and parameters, the release metadata, the
// noisy counts when present, and the label sampling distribution.
struct ModelFile {
  Mode mode = Mode::balanced;
  FeatureMap map;
  Schema schema;
  GeneratorParams params;
  EmbeddingRelease release;
  std::optional<NoisyClassCounts> counts;
  LabelDist label_dist = LabelDist::uniform;
  Eigen::VectorXd label_probs;  // length C (C >= 1)
};

namespace detail {

constexpr char kMagic[8] = {'D', 'P', 'M', 'E', 'R', 'F', 'M', '\0'};
constexpr std::uint32_t kModelVersion = 1;

// Little-endian scalar I/O; doubles round-trip bit-exactly.
template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("model file truncated");
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ParseError("model file truncated");
  return s;
}

inline void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
}

inline Eigen::MatrixXd get_matrix(std::istream& in) {
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(in);
  return m;
}

}  // namespace detail

inline void save_model(const ModelFile& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out.write(detail::kMagic, sizeof detail::kMagic);
  detail::put<std::uint32_t>(out, detail::kModelVersion);
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.mode));

  // Feature map: header then row-major frequency matrix.
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.map.input_dim()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.map.num_features));
  detail::put<double>(out, model.map.bandwidth);
  detail::put<std::uint64_t>(out, model.map.seed);
  for (Eigen::Index r = 0; r < model.map.frequencies.rows(); ++r)
    for (Eigen::Index c = 0; c < model.map.frequencies.cols(); ++c)
      detail::put<double>(out, model.map.frequencies(r, c));

  // Schema.
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.schema.columns.size()));
  for (const auto& col : model.schema.columns) {
    detail::put_string(out, col.name);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(col.kind));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(col.levels.size()));
    for (const auto& l : col.levels) detail::put_string(out, l);
    detail::put<double>(out, col.min);
    detail::put<double>(out, col.max);
  }
  detail::put<std::uint8_t>(out, model.schema.stats_fitted ? 1 : 0);

  // Architecture + parameters.
  const GeneratorArch& arch = model.params.arch;
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.latent_dim));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.num_classes));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int h : arch.hidden) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.num_numerical));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.cat_blocks.size()));
  for (int b : arch.cat_blocks) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(b));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.weights.size()));
  for (std::size_t k = 0; k < model.params.weights.size(); ++k) {
    detail::put_matrix(out, model.params.weights[k]);
    detail::put_matrix(out, model.params.biases[k]);
  }

  // Release metadata and values.
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.release.kind));
  detail::put<std::int64_t>(out, model.release.num_samples_m);
  detail::put<double>(out, model.release.spec.sensitivity);
  detail::put<double>(out, model.release.spec.sigma);
  detail::put<double>(out, model.release.budget_consumed.epsilon);
  detail::put<double>(out, model.release.budget_consumed.delta);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.release.budget_consumed.num_releases));
  detail::put<std::uint64_t>(out, model.release.noise_seed);
  detail::put<std::uint8_t>(out, model.release.weighted ? 1 : 0);
  detail::put_matrix(out, model.release.values);

  detail::put<std::uint8_t>(out, model.counts.has_value() ? 1 : 0);
  if (model.counts) {
    detail::put<std::int64_t>(out, model.counts->raw_total_m);
    detail::put_matrix(out, model.counts->values);
  }

  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.label_dist));
  detail::put_matrix(out, model.label_probs);
  if (!out) throw ParseError("write to " + path + " failed");
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kMagic, sizeof magic) != 0)
    throw ParseError(path + " is not a model file");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != detail::kModelVersion)
    throw ModelVersionMismatch("model file version " + std::to_string(version) +
                               ", expected " + std::to_string(detail::kModelVersion));

  ModelFile model;
  model.mode = static_cast<Mode>(detail::get<std::uint8_t>(in));

  const auto d = detail::get<std::uint32_t>(in);
  const auto num_features = detail::get<std::uint32_t>(in);
  model.map.bandwidth = detail::get<double>(in);
  model.map.seed = detail::get<std::uint64_t>(in);
  model.map.num_features = static_cast<int>(num_features);
  model.map.frequencies.resize(num_features / 2, d);
  for (Eigen::Index r = 0; r < model.map.frequencies.rows(); ++r)
    for (Eigen::Index c = 0; c < model.map.frequencies.cols(); ++c)
      model.map.frequencies(r, c) = detail::get<double>(in);

  const auto ncols = detail::get<std::uint32_t>(in);
  model.schema.columns.resize(ncols);
  for (auto& col : model.schema.columns) {
    col.name = detail::get_string(in);
    col.kind = static_cast<ColumnKind>(detail::get<std::uint8_t>(in));
    const auto nlev = detail::get<std::uint32_t>(in);
    col.levels.resize(nlev);
    for (auto& l : col.levels) l = detail::get_string(in);
    col.min = detail::get<double>(in);
    col.max = detail::get<double>(in);
  }
  model.schema.stats_fitted = detail::get<std::uint8_t>(in) != 0;

  GeneratorArch arch;
  arch.latent_dim = static_cast<int>(detail::get<std::uint32_t>(in));
  arch.num_classes = static_cast<int>(detail::get<std::uint32_t>(in));
  arch.hidden.resize(detail::get<std::uint32_t>(in));
  for (auto& h : arch.hidden) h = static_cast<int>(detail::get<std::uint32_t>(in));
  arch.num_numerical = static_cast<int>(detail::get<std::uint32_t>(in));
  arch.cat_blocks.resize(detail::get<std::uint32_t>(in));
  for (auto& b : arch.cat_blocks) b = static_cast<int>(detail::get<std::uint32_t>(in));
  model.params.arch = arch;
  const auto nlayers = detail::get<std::uint32_t>(in);
  model.params.weights.resize(nlayers);
  model.params.biases.resize(nlayers);
  for (std::size_t k = 0; k < nlayers; ++k) {
    model.params.weights[k] = detail::get_matrix(in);
    const Eigen::MatrixXd b = detail::get_matrix(in);
    model.params.biases[k] = b.col(0);
  }

  model.release.kind = static_cast<EmbeddingKind>(detail::get<std::uint8_t>(in));
  model.release.num_samples_m = detail::get<std::int64_t>(in);
  model.release.spec.sensitivity = detail::get<double>(in);
  model.release.spec.sigma = detail::get<double>(in);
  model.release.budget_consumed.epsilon = detail::get<double>(in);
  model.release.budget_consumed.delta = detail::get<double>(in);
  model.release.budget_consumed.num_releases =
      static_cast<int>(detail::get<std::uint32_t>(in));
  model.release.noise_seed = detail::get<std::uint64_t>(in);
  model.release.weighted = detail::get<std::uint8_t>(in) != 0;
  model.release.values = detail::get_matrix(in);

  if (detail::get<std::uint8_t>(in) != 0) {
    NoisyClassCounts counts;
    counts.raw_total_m = detail::get<std::int64_t>(in);
    const Eigen::MatrixXd v = detail::get_matrix(in);
    counts.values = v.col(0);
    model.counts = std::move(counts);
  }

  model.label_dist = static_cast<LabelDist>(detail::get<std::uint8_t>(in));
  const Eigen::MatrixXd probs = detail::get_matrix(in);
  model.label_probs = probs.cols() > 0 ? Eigen::VectorXd(probs.col(0)) : Eigen::VectorXd();
  return model;
}

}  // namespace dpmerf
