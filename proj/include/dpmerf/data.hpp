#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpmerf/embedding.hpp"
#include "dpmerf/errors.hpp"
#include "dpmerf/rng.hpp"

namespace dpmerf {

// Counters bumped by the CSV reader. They exist so a pipeline run can show
// that no data file is touched after the private releases are made.
struct IoStats {
  std::atomic<std::uint64_t> files_opened{0};
  std::atomic<std::uint64_t> rows_read{0};
};

inline IoStats& io_stats() {
  static IoStats stats;
  return stats;
}

enum class ColumnKind { numerical, categorical, ordinal, label };

inline const char* to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::numerical: return "numerical";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::ordinal: return "ordinal";
    case ColumnKind::label: return "label";
  }
  return "?";
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  std::vector<std::string> levels;  // categorical / ordinal / label
  double min = 0.0, max = 1.0;      // numerical, fitted from the training split
};

// Column layout of a CSV file plus the normalization statistics picked up
// from the training split. Ordinal columns are one-hot encoded the same way
// as categorical ones.
struct Schema {
  std::vector<ColumnSpec> columns;
  bool stats_fitted = false;

  int label_col() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].kind == ColumnKind::label) return static_cast<int>(i);
    return -1;
  }
  int num_classes() const {
    const int lc = label_col();
    return lc < 0 ? 0 : static_cast<int>(columns[static_cast<std::size_t>(lc)].levels.size());
  }
  int num_numerical() const {
    int n = 0;
    for (const auto& c : columns) n += (c.kind == ColumnKind::numerical);
    return n;
  }
  int onehot_width() const {
    int n = 0;
    for (const auto& c : columns)
      if (c.kind == ColumnKind::categorical || c.kind == ColumnKind::ordinal)
        n += static_cast<int>(c.levels.size());
    return n;
  }
  std::vector<int> cat_block_widths() const {
    std::vector<int> w;
    for (const auto& c : columns)
      if (c.kind == ColumnKind::categorical || c.kind == ColumnKind::ordinal)
        w.push_back(static_cast<int>(c.levels.size()));
    return w;
  }
};

inline void validate(const Schema& s) {
  if (s.columns.empty()) throw InvalidSchema("schema has no columns");
  int labels = 0;
  for (const auto& c : s.columns) {
    if (c.name.empty()) throw InvalidSchema("schema column with empty name");
    if (c.kind == ColumnKind::label) {
      ++labels;
      if (c.levels.size() < 2) throw InvalidSchema("label column needs >= 2 levels");
    }
    if ((c.kind == ColumnKind::categorical || c.kind == ColumnKind::ordinal) &&
        c.levels.size() < 2)
      throw InvalidSchema("column '" + c.name + "' needs >= 2 levels");
  }
  if (labels != 1) throw InvalidSchema("schema must have exactly one label column");
}

// Rows in encoded form: numericals min-max scaled to [0,1], categoricals as
// concatenated one-hot blocks (schema order), labels as class indices.
struct Dataset {
  Schema schema;
  Eigen::MatrixXd x_num;   // N x d_num
  Eigen::MatrixXd x_cat;   // N x d_cat (one-hot blocks)
  std::vector<int> labels; // N
  std::string provenance = "real";

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }

  std::vector<std::int64_t> class_counts() const {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(schema.num_classes()), 0);
    for (int y : labels) counts[static_cast<std::size_t>(y)]++;
    return counts;
  }

  std::vector<LabeledPoint> to_labeled_points() const {
    std::vector<LabeledPoint> pts(static_cast<std::size_t>(size()));
    for (std::int64_t i = 0; i < size(); ++i) {
      auto& p = pts[static_cast<std::size_t>(i)];
      p.x_num = x_num.row(i).transpose();
      p.x_cat = x_cat.row(i).transpose();
      p.y = labels[static_cast<std::size_t>(i)];
    }
    return pts;
  }

  // Numerical rows back in data units, clipped to the training range.
  Eigen::MatrixXd denormalized_num() const {
    Eigen::MatrixXd out = x_num;
    int j = 0;
    for (const auto& c : schema.columns) {
      if (c.kind != ColumnKind::numerical) continue;
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double v = c.min + out(i, j) * (c.max - c.min);
        out(i, j) = std::clamp(v, c.min, c.max);
      }
      ++j;
    }
    return out;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline int level_index(const ColumnSpec& col, const std::string& value) {
  for (std::size_t i = 0; i < col.levels.size(); ++i)
    if (col.levels[i] == value) return static_cast<int>(i);
  return -1;
}

}  // namespace detail

// Schema file: one column per line, `name kind [level|level|...]`.
// Kinds: numerical, categorical, ordinal, label. '#' starts a comment.
inline Schema parse_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSchema("cannot open schema file " + path);
  Schema schema;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    ColumnSpec col;
    std::string kind, levels;
    ss >> col.name >> kind;
    if (col.name.empty() || kind.empty())
      throw InvalidSchema("schema line " + std::to_string(lineno) + ": expected 'name kind'");
    if (kind == "numerical") col.kind = ColumnKind::numerical;
    else if (kind == "categorical") col.kind = ColumnKind::categorical;
    else if (kind == "ordinal") col.kind = ColumnKind::ordinal;
    else if (kind == "label") col.kind = ColumnKind::label;
    else throw InvalidSchema("schema line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    if (col.kind != ColumnKind::numerical) {
      ss >> levels;
      std::string lvl;
      std::istringstream ls(levels);
      while (std::getline(ls, lvl, '|'))
        if (!lvl.empty()) col.levels.push_back(lvl);
    }
    schema.columns.push_back(std::move(col));
  }
  validate(schema);
  return schema;
}

inline void write_schema_file(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  for (const auto& col : schema.columns) {
    out << col.name << ' ' << to_string(col.kind);
    if (col.kind != ColumnKind::numerical) {
      out << ' ';
      for (std::size_t i = 0; i < col.levels.size(); ++i)
        out << col.levels[i] << (i + 1 < col.levels.size() ? "|" : "");
    }
    out << '\n';
  }
}

// Reads a CSV against a schema. When `fitted` is false the numerical min/max
// are taken from this file (training split); otherwise the provided stats are
// applied and out-of-range values clamp into [0,1].
inline Dataset load_tabular(const std::string& csv_path, Schema schema) {
  validate(schema);
  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open data file " + csv_path);
  io_stats().files_opened.fetch_add(1, std::memory_order_relaxed);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv_path + ": missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() != schema.columns.size())
    throw SchemaMismatch(csv_path + ": header has " + std::to_string(header.size()) +
                         " columns, schema has " + std::to_string(schema.columns.size()));
  for (std::size_t i = 0; i < header.size(); ++i)
    if (detail::trim(header[i]) != schema.columns[i].name)
      throw SchemaMismatch(csv_path + ": header column '" + detail::trim(header[i]) +
                           "' does not match schema column '" + schema.columns[i].name + "'");

  const bool fit_stats = !schema.stats_fitted;
  std::vector<std::vector<double>> num_rows;
  std::vector<std::vector<int>> cat_rows;  // level index per categorical column
  std::vector<int> labels;
  int row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    io_stats().rows_read.fetch_add(1, std::memory_order_relaxed);
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != schema.columns.size())
      throw ParseError(csv_path + " line " + std::to_string(row + 1) + ": expected " +
                       std::to_string(schema.columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    std::vector<double> nums;
    std::vector<int> cats;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const ColumnSpec& col = schema.columns[c];
      const std::string v = detail::trim(fields[c]);
      if (col.kind == ColumnKind::numerical) {
        try {
          std::size_t pos = 0;
          const double x = std::stod(v, &pos);
          if (pos != v.size()) throw std::invalid_argument(v);
          nums.push_back(x);
        } catch (const std::exception&) {
          throw ParseError(csv_path + " line " + std::to_string(row + 1) +
                           ": bad numerical value '" + v + "' in column '" + col.name + "'");
        }
      } else {
        const int idx = detail::level_index(col, v);
        if (idx < 0)
          throw SchemaMismatch(csv_path + ": unseen level '" + v + "' for column '" +
                               col.name + "' in row " + std::to_string(row));
        if (col.kind == ColumnKind::label)
          labels.push_back(idx);
        else
          cats.push_back(idx);
      }
    }
    num_rows.push_back(std::move(nums));
    cat_rows.push_back(std::move(cats));
  }
  if (row == 0) throw EmptyDataset(csv_path + ": no data rows");

  const int d_num = schema.num_numerical();
  if (fit_stats) {
    int j = 0;
    for (auto& col : schema.columns) {
      if (col.kind != ColumnKind::numerical) continue;
      double lo = num_rows[0][static_cast<std::size_t>(j)], hi = lo;
      for (const auto& r : num_rows) {
        lo = std::min(lo, r[static_cast<std::size_t>(j)]);
        hi = std::max(hi, r[static_cast<std::size_t>(j)]);
      }
      col.min = lo;
      col.max = hi;
      ++j;
    }
    schema.stats_fitted = true;
  }

  Dataset ds;
  ds.schema = schema;
  ds.x_num.resize(row, d_num);
  ds.x_cat.resize(row, schema.onehot_width());
  ds.x_cat.setZero();
  ds.labels = std::move(labels);
  const auto widths = schema.cat_block_widths();
  for (int i = 0; i < row; ++i) {
    int j = 0;
    for (const auto& col : schema.columns) {
      if (col.kind != ColumnKind::numerical) continue;
      const double span = col.max - col.min;
      double v = span > 0.0 ? (num_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - col.min) / span : 0.5;
      ds.x_num(i, j) = std::clamp(v, 0.0, 1.0);
      ++j;
    }
    int off = 0;
    for (std::size_t b = 0; b < widths.size(); ++b) {
      ds.x_cat(i, off + cat_rows[static_cast<std::size_t>(i)][b]) = 1.0;
      off += widths[b];
    }
  }
  return ds;
}

inline Dataset load_tabular(const std::string& csv_path, const std::string& schema_path) {
  return load_tabular(csv_path, parse_schema_file(schema_path));
}

// Writes rows back in the original header order; numericals de-normalized,
// one-hot blocks decoded to their level strings.
inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  const auto& cols = ds.schema.columns;
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << cols[c].name << (c + 1 < cols.size() ? "," : "\n");
  const Eigen::MatrixXd raw = ds.denormalized_num();
  const auto widths = ds.schema.cat_block_widths();
  char buf[64];
  for (std::int64_t i = 0; i < ds.size(); ++i) {
    int jn = 0, jb = 0, off = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c > 0) out << ',';
      switch (cols[c].kind) {
        case ColumnKind::numerical: {
          std::snprintf(buf, sizeof buf, "%.17g", raw(i, jn++));
          out << buf;
          break;
        }
        case ColumnKind::categorical:
        case ColumnKind::ordinal: {
          int idx = 0;
          double best = -1.0;
          for (int k = 0; k < widths[static_cast<std::size_t>(jb)]; ++k)
            if (ds.x_cat(i, off + k) > best) {
              best = ds.x_cat(i, off + k);
              idx = k;
            }
          out << cols[c].levels[static_cast<std::size_t>(idx)];
          off += widths[static_cast<std::size_t>(jb)];
          ++jb;
          break;
        }
        case ColumnKind::label:
          out << cols[c].levels[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])];
          break;
      }
    }
    out << '\n';
  }
}

// Subsamples the majority class (ties break toward the lowest class index)
// without replacement down to ceil(rate * count); other classes untouched.
inline Dataset undersample(const Dataset& ds, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw InvalidConfig("undersample rate must be in (0, 1]");
  if (rate == 1.0) return ds;
  const auto counts = ds.class_counts();
  int majority = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(majority)]) majority = static_cast<int>(c);

  const std::int64_t keep_count =
      static_cast<std::int64_t>(std::ceil(rate * static_cast<double>(counts[static_cast<std::size_t>(majority)])));
  std::vector<std::int64_t> majority_rows;
  for (std::int64_t i = 0; i < ds.size(); ++i)
    if (ds.labels[static_cast<std::size_t>(i)] == majority) majority_rows.push_back(i);

  // Fisher-Yates prefix selection.
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(keep_count); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(majority_rows.size() - i));
    std::swap(majority_rows[i], majority_rows[j]);
  }
  std::vector<bool> keep(static_cast<std::size_t>(ds.size()), true);
  for (std::size_t i = static_cast<std::size_t>(keep_count); i < majority_rows.size(); ++i)
    keep[static_cast<std::size_t>(majority_rows[i])] = false;

  Dataset out;
  out.schema = ds.schema;
  out.provenance = ds.provenance;
  const std::int64_t n = std::count(keep.begin(), keep.end(), true);
  out.x_num.resize(n, ds.x_num.cols());
  out.x_cat.resize(n, ds.x_cat.cols());
  out.labels.reserve(static_cast<std::size_t>(n));
  std::int64_t w = 0;
  for (std::int64_t i = 0; i < ds.size(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    out.x_num.row(w) = ds.x_num.row(i);
    out.x_cat.row(w) = ds.x_cat.row(i);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    ++w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2-D Gaussian grid mixture benchmark: 25 components on a 5x5 grid, class c
// owning grid row c, equal component weights 1/25.

struct GridMixtureConfig {
  double spacing = 1.0;
  double component_std = 0.2;
  int samples_per_component = 4000;
  double test_fraction = 0.1;
};

struct GridMixture {
  Eigen::MatrixXd means;            // 25 x 2
  std::vector<int> component_class; // 25
  double component_std = 0.2;
  int num_classes = 5;

  static GridMixture make(const GridMixtureConfig& cfg) {
    GridMixture mix;
    mix.component_std = cfg.component_std;
    mix.means.resize(25, 2);
    mix.component_class.resize(25);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const int k = 5 * i + j;
        mix.means(k, 0) = (j - 2) * cfg.spacing;
        mix.means(k, 1) = (i - 2) * cfg.spacing;
        mix.component_class[static_cast<std::size_t>(k)] = i;
      }
    return mix;
  }

  // log p(x, y) = log sum_{j in class y} (1/25) N(x | mu_j, std^2 I2)
  double log_density(const Eigen::Vector2d& x, int y) const {
    const double var = component_std * component_std;
    const double log_norm = -std::log(25.0) - std::log(2.0 * M_PI * var);
    double max_e = -std::numeric_limits<double>::infinity();
    std::vector<double> exponents;
    for (int k = 0; k < 25; ++k) {
      if (component_class[static_cast<std::size_t>(k)] != y) continue;
      const double e = -(x - means.row(k).transpose()).squaredNorm() / (2.0 * var);
      exponents.push_back(e);
      max_e = std::max(max_e, e);
    }
    double s = 0.0;
    for (double e : exponents) s += std::exp(e - max_e);
    return log_norm + max_e + std::log(s);
  }
};

struct MixtureSplit {
  Dataset train;
  Dataset test;
  GridMixture mixture;
};

namespace detail {

inline Schema grid_schema(int num_classes) {
  Schema s;
  ColumnSpec x1{"x1", ColumnKind::numerical, {}, 0.0, 1.0};
  ColumnSpec x2{"x2", ColumnKind::numerical, {}, 0.0, 1.0};
  ColumnSpec label;
  label.name = "class";
  label.kind = ColumnKind::label;
  for (int c = 0; c < num_classes; ++c) label.levels.push_back(std::to_string(c));
  s.columns = {x1, x2, label};
  return s;
}

inline Dataset grid_dataset(const Eigen::MatrixXd& raw, const std::vector<int>& labels,
                            Schema schema) {
  Dataset ds;
  ds.schema = std::move(schema);
  if (!ds.schema.stats_fitted) {
    for (int j = 0; j < 2; ++j) {
      ds.schema.columns[static_cast<std::size_t>(j)].min = raw.col(j).minCoeff();
      ds.schema.columns[static_cast<std::size_t>(j)].max = raw.col(j).maxCoeff();
    }
    ds.schema.stats_fitted = true;
  }
  ds.x_num.resize(raw.rows(), 2);
  for (int j = 0; j < 2; ++j) {
    const auto& col = ds.schema.columns[static_cast<std::size_t>(j)];
    const double span = col.max - col.min;
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      ds.x_num(i, j) = span > 0.0 ? std::clamp((raw(i, j) - col.min) / span, 0.0, 1.0) : 0.5;
  }
  ds.x_cat.resize(raw.rows(), 0);
  ds.labels = labels;
  return ds;
}

}  // namespace detail

// Draws samples_per_component points per component, reserving test_fraction
// of each component for the test split (stratified). Test rows are scaled
// with the training-split statistics.
inline MixtureSplit make_gaussian_grid(std::uint64_t seed,
                                       const GridMixtureConfig& cfg = {}) {
  MixtureSplit out;
  out.mixture = GridMixture::make(cfg);
  const int per = cfg.samples_per_component;
  const int test_per = static_cast<int>(std::lround(cfg.test_fraction * per));
  const int train_per = per - test_per;

  Eigen::MatrixXd train_raw(25 * train_per, 2), test_raw(25 * test_per, 2);
  std::vector<int> train_labels, test_labels;
  train_labels.reserve(static_cast<std::size_t>(train_raw.rows()));
  test_labels.reserve(static_cast<std::size_t>(test_raw.rows()));

  SplitMix64 rng(seed);
  Eigen::Index tr = 0, te = 0;
  for (int k = 0; k < 25; ++k) {
    const int cls = out.mixture.component_class[static_cast<std::size_t>(k)];
    for (int s = 0; s < per; ++s) {
      const double x = out.mixture.means(k, 0) + cfg.component_std * rng.next_gaussian();
      const double y = out.mixture.means(k, 1) + cfg.component_std * rng.next_gaussian();
      if (s < train_per) {
        train_raw(tr, 0) = x;
        train_raw(tr, 1) = y;
        train_labels.push_back(cls);
        ++tr;
      } else {
        test_raw(te, 0) = x;
        test_raw(te, 1) = y;
        test_labels.push_back(cls);
        ++te;
      }
    }
  }

  Schema schema = detail::grid_schema(out.mixture.num_classes);
  out.train = detail::grid_dataset(train_raw, train_labels, schema);
  out.test = detail::grid_dataset(test_raw, test_labels, out.train.schema);
  return out;
}

// Mean negative log density of labeled 2-D samples under the mixture; inputs
// are in raw data units.
inline double nll(const Eigen::MatrixXd& points_raw, const std::vector<int>& labels,
                  const GridMixture& mix) {
  if (points_raw.rows() == 0) throw EmptyDataset("nll: no points");
  if (points_raw.cols() != 2) throw DimensionMismatch("nll expects 2-D points");
  if (static_cast<std::size_t>(points_raw.rows()) != labels.size())
    throw DimensionMismatch("nll: points/labels size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < points_raw.rows(); ++i)
    total -= mix.log_density(points_raw.row(i).transpose(),
                             labels[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(points_raw.rows());
}

inline double nll(const Dataset& ds, const GridMixture& mix) {
  return nll(ds.denormalized_num(), ds.labels, mix);
}

}  // namespace dpmerf
