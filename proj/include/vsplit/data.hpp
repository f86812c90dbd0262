#pragma once

// Dataset ingestion and vertical partitioning: CSV parsing with one-hot and
// z-score encoding, partition plans, per-client column slices, and the
// synthetic Gaussian-blob generator used for desk-scale experiments.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vsplit/error.hpp"
#include "vsplit/tensor.hpp"

namespace vsplit {

struct Dataset {
  Matrix features;  // n_samples x n_features
  std::vector<std::size_t> labels;
  std::vector<std::string> feature_names;
  /// For each encoded feature, the raw column it came from (one-hot
  /// expansions share a source).
  std::vector<std::size_t> source_column;
  std::vector<std::string> source_names;
  std::vector<std::string> class_names;
  std::size_t n_classes = 0;

  [[nodiscard]] std::size_t n_samples() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t n_features() const noexcept { return features.cols(); }

  void validate() const {
    if (labels.size() != features.rows()) {
      throw DataError("dataset has " + std::to_string(features.rows()) + " rows but " +
                      std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= n_classes) {
        throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " exceeds class count " + std::to_string(n_classes));
      }
    }
  }

  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out = *this;
    out.features = gather_rows(features, rows);
    out.labels.clear();
    for (const auto r : rows) out.labels.push_back(labels.at(r));
    return out;
  }
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

// ---------------------------------------------------------------------------
// Stratified train/test split

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, a seeded shuffle sends round(test_fraction * count) rows to the
/// test side. Both index lists come back sorted.
inline SplitIndices stratified_split(std::span<const std::size_t> labels, std::size_t n_classes,
                                     double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in [0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
  Rng rng(seed);
  SplitIndices out;
  for (auto& rows : by_class) {
    rng.shuffle(rows);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  if (out.train.empty()) throw DataError("stratified split left no training rows");
  return out;
}

// ---------------------------------------------------------------------------
// CSV

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column_index(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::optional<double> parse_number(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Reads a delimited file with a header row. `delimiter` 0 means auto-detect:
/// ';' when the header contains semicolons but no commas, ',' otherwise.
inline RawTable read_csv(const std::string& path, char delimiter = 0) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty (header row expected)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (delimiter == 0) {
    delimiter = (line.find(';') != std::string::npos && line.find(',') == std::string::npos) ? ';' : ',';
  }
  for (auto& h : detail::split_csv_line(line, delimiter)) table.header.push_back(detail::trim(h));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, delimiter);
    if (fields.size() != table.header.size()) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = detail::trim(f);
    table.rows.push_back(std::move(fields));
  }
  if (table.rows.empty()) throw DataError("'" + path + "' has no data rows");
  return table;
}

enum class ColumnKind { numeric, categorical };

/// Column name -> kind. Columns not listed are inferred from the training rows:
/// numeric when every value parses as a number.
using ColumnSchema = std::map<std::string, ColumnKind>;

inline ColumnKind parse_column_kind(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  throw ConfigError("unknown column kind '" + s + "' (expected numeric or categorical)");
}

/// Encoding fitted on training rows: z-score statistics for numeric columns,
/// the sorted category vocabulary for categorical ones, and the label classes.
class Preprocessor {
 public:
  struct Column {
    std::size_t source = 0;
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;
    double stddev = 1.0;
    std::vector<std::string> categories;
  };

  static constexpr double kMinStddev = 1e-12;

  static Preprocessor fit(const RawTable& table, std::span<const std::size_t> train_rows,
                          const std::string& label_column, const ColumnSchema& schema) {
    Preprocessor p;
    p.label_index_ = table.column_index(label_column);
    for (const auto& [name, kind] : schema) {
      (void)kind;
      if (name != label_column) (void)table.column_index(name);
    }
    if (train_rows.empty()) throw DataError("no training rows to fit the encoding on");

    // Label vocabulary over every row so test rows never carry an unseen class.
    std::vector<std::string> classes;
    for (const auto& row : table.rows) classes.push_back(row[p.label_index_]);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const bool numeric_labels = std::all_of(classes.begin(), classes.end(), [](const std::string& c) {
      return detail::parse_number(c).has_value();
    });
    if (numeric_labels) {
      std::stable_sort(classes.begin(), classes.end(), [](const std::string& a, const std::string& b) {
        return *detail::parse_number(a) < *detail::parse_number(b);
      });
    }
    p.classes_ = classes;

    std::size_t source = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == p.label_index_) continue;
      Column col;
      col.source = source++;
      col.name = table.header[c];
      const auto it = schema.find(col.name);
      if (it != schema.end()) {
        col.kind = it->second;
      } else {
        const bool all_numeric = std::all_of(train_rows.begin(), train_rows.end(), [&](std::size_t r) {
          return detail::parse_number(table.rows[r][c]).has_value();
        });
        col.kind = all_numeric ? ColumnKind::numeric : ColumnKind::categorical;
      }
      if (col.kind == ColumnKind::numeric) {
        double sum = 0.0;
        for (const auto r : train_rows) sum += p.numeric_at(table, r, c);
        col.mean = sum / static_cast<double>(train_rows.size());
        double sq = 0.0;
        for (const auto r : train_rows) {
          const double d = p.numeric_at(table, r, c) - col.mean;
          sq += d * d;
        }
        col.stddev = std::sqrt(sq / static_cast<double>(train_rows.size()));
      } else {
        for (const auto r : train_rows) col.categories.push_back(table.rows[r][c]);
        std::sort(col.categories.begin(), col.categories.end());
        col.categories.erase(std::unique(col.categories.begin(), col.categories.end()), col.categories.end());
      }
      p.columns_.push_back(std::move(col));
      p.raw_index_.push_back(c);
    }
    if (p.columns_.empty()) throw DataError("no feature columns besides the label");
    return p;
  }

  [[nodiscard]] Dataset transform(const RawTable& table, std::span<const std::size_t> rows) const {
    if (rows.empty()) throw DataError("transform: no rows selected");
    std::size_t width = 0;
    Dataset ds;
    for (const auto& col : columns_) {
      ds.source_names.push_back(col.name);
      if (col.kind == ColumnKind::numeric) {
        ds.feature_names.push_back(col.name);
        ds.source_column.push_back(col.source);
        ++width;
      } else {
        for (const auto& cat : col.categories) {
          ds.feature_names.push_back(col.name + "=" + cat);
          ds.source_column.push_back(col.source);
        }
        width += col.categories.size();
      }
    }
    if (width == 0) throw DataError("encoding produced no feature columns");
    ds.features = Matrix(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i];
      std::size_t out_col = 0;
      for (std::size_t k = 0; k < columns_.size(); ++k) {
        const auto& col = columns_[k];
        const auto c = raw_index_[k];
        if (col.kind == ColumnKind::numeric) {
          const double z = (numeric_at(table, r, c) - col.mean) / std::max(col.stddev, kMinStddev);
          ds.features(i, out_col++) = col.stddev < kMinStddev ? 0.0 : z;
        } else {
          const auto& value = table.rows[r][c];
          const auto hit = std::lower_bound(col.categories.begin(), col.categories.end(), value);
          if (hit != col.categories.end() && *hit == value) {
            ds.features(i, out_col + static_cast<std::size_t>(hit - col.categories.begin())) = 1.0;
          }
          out_col += col.categories.size();
        }
      }
      const auto& label = table.rows[r][label_index_];
      const auto it = std::find(classes_.begin(), classes_.end(), label);
      ds.labels.push_back(static_cast<std::size_t>(it - classes_.begin()));
    }
    ds.class_names = classes_;
    ds.n_classes = classes_.size();
    ds.validate();
    return ds;
  }

  [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }
  [[nodiscard]] const std::vector<std::string>& classes() const noexcept { return classes_; }
  [[nodiscard]] std::size_t label_index() const noexcept { return label_index_; }

 private:
  double numeric_at(const RawTable& table, std::size_t r, std::size_t c) const {
    const auto v = detail::parse_number(table.rows[r][c]);
    if (!v) {
      throw DataError("row " + std::to_string(r + 1) + ", column '" + table.header[c] +
                      "': non-numeric value '" + table.rows[r][c] + "'");
    }
    return *v;
  }

  std::size_t label_index_ = 0;
  std::vector<Column> columns_;
  std::vector<std::size_t> raw_index_;
  std::vector<std::string> classes_;
};

/// Reads, splits (stratified) and encodes a CSV file. The encoding is fitted
/// on the training rows only.
inline TrainTest load_csv(const std::string& path, const std::string& label_column, const ColumnSchema& schema,
                          double test_fraction, std::uint64_t split_seed, char delimiter = 0) {
  const RawTable table = read_csv(path, delimiter);
  const auto label_idx = table.column_index(label_column);
  // Provisional label ids for stratification; sorted order matches the encoder.
  std::vector<std::string> names;
  for (const auto& row : table.rows) names.push_back(row[label_idx]);
  std::vector<std::string> uniq = names;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<std::size_t> ids;
  for (const auto& n : names) {
    ids.push_back(static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), n) - uniq.begin()));
  }
  const auto split = stratified_split(ids, uniq.size(), test_fraction, split_seed);
  const auto pre = Preprocessor::fit(table, split.train, label_column, schema);
  TrainTest out;
  out.train = pre.transform(table, split.train);
  out.test = pre.transform(table, split.test.empty() ? split.train : split.test);
  return out;
}

/// Loads every row as training data.
inline Dataset load_csv(const std::string& path, const std::string& label_column, const ColumnSchema& schema,
                        char delimiter = 0) {
  const RawTable table = read_csv(path, delimiter);
  std::vector<std::size_t> all(table.rows.size());
  std::iota(all.begin(), all.end(), 0);
  return Preprocessor::fit(table, all, label_column, schema).transform(table, all);
}

// ---------------------------------------------------------------------------
// Partition plans

class PartitionPlan {
 public:
  PartitionPlan() = default;

  /// Validates that `columns` is a partition of {0..n_features-1} into
  /// non-empty lists.
  PartitionPlan(std::size_t n_features, std::vector<std::vector<std::size_t>> columns)
      : n_features_(n_features), columns_(std::move(columns)) {
    if (columns_.empty()) throw PlanError("plan needs at least one client");
    std::vector<int> owner(n_features_, -1);
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      if (columns_[k].empty()) throw PlanError("client " + std::to_string(k) + " has no columns");
      for (const auto c : columns_[k]) {
        if (c >= n_features_) {
          throw PlanError("column " + std::to_string(c) + " out of range for " + std::to_string(n_features_) +
                          " features");
        }
        if (owner[c] >= 0) {
          throw PlanError("column " + std::to_string(c) + " assigned to clients " + std::to_string(owner[c]) +
                          " and " + std::to_string(k));
        }
        owner[c] = static_cast<int>(k);
      }
    }
    for (std::size_t c = 0; c < n_features_; ++c) {
      if (owner[c] < 0) throw PlanError("column " + std::to_string(c) + " is not assigned to any client");
    }
  }

  [[nodiscard]] std::size_t clients() const noexcept { return columns_.size(); }
  [[nodiscard]] std::size_t n_features() const noexcept { return n_features_; }
  [[nodiscard]] const std::vector<std::size_t>& columns(std::size_t k) const { return columns_.at(k); }
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& all_columns() const noexcept { return columns_; }
  [[nodiscard]] std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    for (const auto& c : columns_) w.push_back(c.size());
    return w;
  }

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;

 private:
  std::size_t n_features_ = 0;
  std::vector<std::vector<std::size_t>> columns_;
};

/// Near-equal consecutive blocks; the remainder goes to the earliest clients.
inline PartitionPlan make_contiguous_plan(std::size_t n_features, std::size_t k) {
  if (k == 0) throw PlanError("plan needs at least one client");
  if (k > n_features) {
    throw PlanError("cannot split " + std::to_string(n_features) + " features across " + std::to_string(k) +
                    " clients");
  }
  std::vector<std::vector<std::size_t>> cols(k);
  const std::size_t base = n_features / k;
  const std::size_t extra = n_features % k;
  std::size_t next = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t width = base + (i < extra ? 1 : 0);
    for (std::size_t j = 0; j < width; ++j) cols[i].push_back(next++);
  }
  return PartitionPlan(n_features, std::move(cols));
}

inline PartitionPlan make_plan_from_lists(std::size_t n_features, std::vector<std::vector<std::size_t>> lists) {
  return PartitionPlan(n_features, std::move(lists));
}

/// Lifts a plan over raw source columns to the encoded feature columns of `ds`
/// (a one-hot group follows its source column).
inline PartitionPlan expand_plan(const PartitionPlan& source_plan, const Dataset& ds) {
  if (source_plan.n_features() != ds.source_names.size()) {
    throw PlanError("plan covers " + std::to_string(source_plan.n_features()) + " raw columns but dataset has " +
                    std::to_string(ds.source_names.size()));
  }
  std::vector<std::vector<std::size_t>> cols(source_plan.clients());
  for (std::size_t k = 0; k < source_plan.clients(); ++k) {
    for (const auto src : source_plan.columns(k)) {
      for (std::size_t f = 0; f < ds.source_column.size(); ++f) {
        if (ds.source_column[f] == src) cols[k].push_back(f);
      }
    }
  }
  return PartitionPlan(ds.n_features(), std::move(cols));
}

// ---------------------------------------------------------------------------
// Vertical split

/// Row-aligned per-client feature blocks. Labels belong to the label-holding
/// client only.
struct SplitDataset {
  std::vector<Matrix> parts;
  std::vector<std::size_t> labels;
  std::size_t label_client = 0;
  std::size_t n_classes = 0;

  [[nodiscard]] std::size_t clients() const noexcept { return parts.size(); }
  [[nodiscard]] std::size_t rows() const noexcept { return labels.size(); }
};

inline SplitDataset vertical_split(const Dataset& ds, const PartitionPlan& plan, std::size_t label_client = 0) {
  if (plan.n_features() != ds.n_features()) {
    throw PlanError("plan covers " + std::to_string(plan.n_features()) + " features but dataset has " +
                    std::to_string(ds.n_features()));
  }
  if (label_client >= plan.clients()) {
    throw PlanError("label client " + std::to_string(label_client) + " out of range for " +
                    std::to_string(plan.clients()) + " clients");
  }
  SplitDataset out;
  for (std::size_t k = 0; k < plan.clients(); ++k) out.parts.push_back(slice_cols(ds.features, plan.columns(k)));
  out.labels = ds.labels;
  out.label_client = label_client;
  out.n_classes = ds.n_classes;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct BlobSpec {
  std::size_t n_samples = 1000;
  std::size_t n_features = 20;
  std::size_t n_classes = 3;
  /// One entry per client; client k's contiguous column block starts with this
  /// many informative dimensions.
  std::vector<std::size_t> informative_per_client{2, 2, 2, 2};
  /// Spread of class centres along each informative dimension, in units of the
  /// unit noise standard deviation.
  double separation = 3.0;
};

/// Class-conditional Gaussian clusters. Labels cycle through the classes and
/// rows are shuffled; everything is a function of the seed.
inline Dataset synth_blobs(const BlobSpec& spec, Rng& rng) {
  const std::size_t k = spec.informative_per_client.size();
  if (spec.n_samples == 0 || spec.n_features == 0 || spec.n_classes == 0) {
    throw ConfigError("synthetic data needs positive sample, feature and class counts");
  }
  if (k == 0) throw ConfigError("informative_per_client must name at least one client");
  const std::size_t informative_total =
      std::accumulate(spec.informative_per_client.begin(), spec.informative_per_client.end(), std::size_t{0});
  if (informative_total > spec.n_features) {
    throw ConfigError("informative dimensions (" + std::to_string(informative_total) + ") exceed feature count (" +
                      std::to_string(spec.n_features) + ")");
  }
  if (k > spec.n_features) throw ConfigError("more clients than features");
  const auto blocks = make_contiguous_plan(spec.n_features, k);
  std::vector<bool> informative(spec.n_features, false);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& cols = blocks.columns(c);
    if (spec.informative_per_client[c] > cols.size()) {
      throw ConfigError("client " + std::to_string(c) + " asks for " +
                        std::to_string(spec.informative_per_client[c]) + " informative dims but owns " +
                        std::to_string(cols.size()) + " columns");
    }
    for (std::size_t j = 0; j < spec.informative_per_client[c]; ++j) informative[cols[j]] = true;
  }

  Matrix centers(spec.n_classes, spec.n_features);
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t f = 0; f < spec.n_features; ++f) {
      if (informative[f]) centers(c, f) = spec.separation * inv_sqrt2 * rng.normal();
    }
  }

  std::vector<std::size_t> labels(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) labels[i] = i % spec.n_classes;
  rng.shuffle(labels);

  Dataset ds;
  ds.features = Matrix(spec.n_samples, spec.n_features);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    for (std::size_t f = 0; f < spec.n_features; ++f) ds.features(i, f) = centers(labels[i], f) + rng.normal();
  }
  ds.labels = std::move(labels);
  ds.n_classes = spec.n_classes;
  for (std::size_t f = 0; f < spec.n_features; ++f) {
    ds.feature_names.push_back("x" + std::to_string(f));
    ds.source_names.push_back(ds.feature_names.back());
    ds.source_column.push_back(f);
  }
  for (std::size_t c = 0; c < spec.n_classes; ++c) ds.class_names.push_back(std::to_string(c));
  ds.validate();
  return ds;
}

}  // namespace vsplit
