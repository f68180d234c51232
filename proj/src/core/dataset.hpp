#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "table.hpp"

namespace slicelens {

using RowIndex = std::uint32_t;
using ValueIndex = std::uint32_t;
using FeatureIndex = std::uint32_t;

inline constexpr std::string_view kOtherValue = "OTHER";
inline constexpr std::string_view kMissingValue = "MISSING";

enum class FeatureKind { categorical, numeric };

/// What the score column holds: the model's P(y=1), or a per-example loss
/// computed elsewhere (any scoring function).
enum class ScoreKind { probability, loss };

/// Numeric bin (lo, hi]; the first bin of a feature is closed at lo.
struct BinRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::categorical;
  /// Display label per value index. For numeric features, bins come first in
  /// increasing order, followed by MISSING when present.
  std::vector<std::string> values;
  std::vector<BinRange> bins;
  std::optional<ValueIndex> other_bucket;
  std::optional<ValueIndex> missing;
  /// A feature with a single usable value; it never produces literals.
  bool degenerate = false;

  std::size_t domain_size() const { return values.size(); }
  std::optional<ValueIndex> find(std::string_view label) const;
  /// Bin holding x; values outside the fitted range clamp to the end bins.
  ValueIndex bin_of(double x) const;
  /// Maps a raw categorical cell to its value index (kept value, OTHER or
  /// MISSING).
  ValueIndex categorical_index(std::string_view raw) const;
};

/// Equi-depth discretization. Cut points are the distinct type-7 quantiles at
/// j/num_bins that lie strictly below the column maximum; NaN entries are
/// treated as missing.
FeatureSchema discretize(std::span<const double> values, int num_bins, std::string name = {});

/// Keeps the N most frequent values (ties broken lexicographically) and maps
/// the rest to a single OTHER bucket. Empty strings are missing values and
/// map to MISSING, which never counts against N.
FeatureSchema bucket_rare_values(std::span<const std::string> values, int top_values,
                                 std::string name = {});

/// Immutable columnar dataset of discretized features, labels and scores.
class Dataset {
 public:
  Dataset(std::vector<FeatureSchema> schemas, std::vector<std::vector<ValueIndex>> columns,
          std::vector<std::uint8_t> labels, std::vector<double> scores,
          ScoreKind score_kind = ScoreKind::probability,
          std::vector<std::vector<double>> raw_numeric = {},
          std::vector<RowIndex> source_rows = {});

  std::size_t size() const { return labels_.size(); }
  std::size_t num_features() const { return schemas_.size(); }

  const FeatureSchema& schema(FeatureIndex f) const { return schemas_.at(f); }
  const std::vector<FeatureSchema>& schemas() const { return schemas_; }
  std::span<const ValueIndex> column(FeatureIndex f) const { return columns_.at(f); }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<const double> scores() const { return scores_; }
  ScoreKind score_kind() const { return score_kind_; }

  /// Raw numeric values (NaN when missing); empty for categorical features or
  /// datasets built without raw values.
  std::span<const double> raw_numeric(FeatureIndex f) const;

  /// Row number in the originally loaded table (identity unless sampled).
  RowIndex source_row(RowIndex row) const {
    return source_rows_.empty() ? row : source_rows_[row];
  }

  /// Sorted rows holding value v of feature f.
  std::span<const RowIndex> posting(FeatureIndex f, ValueIndex v) const;

  std::optional<FeatureIndex> feature_index(std::string_view name) const;

  /// Position of feature f when features are sorted by name; drives the
  /// canonical literal order.
  std::uint32_t name_rank(FeatureIndex f) const { return name_rank_.at(f); }

  /// Same features and schemas, restricted to the given sorted rows.
  Dataset subset(std::span<const RowIndex> rows) const;

  /// Same rows and schemas with replaced labels (used for label injection).
  Dataset with_labels(std::vector<std::uint8_t> labels) const;

 private:
  std::vector<FeatureSchema> schemas_;
  std::vector<std::vector<ValueIndex>> columns_;
  std::vector<std::uint8_t> labels_;
  std::vector<double> scores_;
  ScoreKind score_kind_;
  std::vector<std::vector<double>> raw_numeric_;
  std::vector<RowIndex> source_rows_;
  std::vector<std::vector<std::vector<RowIndex>>> postings_;
  std::vector<std::uint32_t> name_rank_;
};

// ---------------------------------------------------------------------------
// Loading

struct FeatureOption {
  std::optional<FeatureKind> kind;
  bool ignore = false;
  std::optional<int> bins;
  std::optional<int> top_values;
};

struct SchemaOptions {
  int num_bins = 10;
  int top_values = 50;
  std::map<std::string, FeatureOption, std::less<>> features;
};

/// Parses the key-value schema options format:
///
///     # comment
///     age       = numeric bins=5
///     workclass = categorical top=20
///     row_id    = ignore
///     default.bins = 8
///     default.top  = 40
SchemaOptions parse_schema_options(std::string_view text);
SchemaOptions read_schema_options_file(const std::filesystem::path& path);

struct LoadOptions {
  std::string label_column = "label";
  std::string score_column = "score";
  ScoreKind score_kind = ScoreKind::probability;
  SchemaOptions schema;
};

struct FeatureSummary {
  std::string name;
  FeatureKind kind = FeatureKind::categorical;
  std::size_t domain_size = 0;
  std::size_t missing_cells = 0;
  bool degenerate = false;
  bool has_other_bucket = false;
};

struct IngestionReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_missing_label = 0;
  std::size_t dropped_bad_score = 0;
  std::size_t missing_feature_cells = 0;
  std::vector<FeatureSummary> features;
  std::string error;  // set when loading failed validation

  std::size_t dropped() const { return dropped_missing_label + dropped_bad_score; }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct LoadResult {
  std::shared_ptr<const Dataset> dataset;
  IngestionReport report;
};

/// Thrown by load() on validation failures; carries the partial report.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& message, IngestionReport report)
      : std::runtime_error(message), report_(std::move(report)) {}
  const IngestionReport& report() const { return report_; }

 private:
  IngestionReport report_;
};

/// Builds a Dataset from a raw table. Rows whose label or score is missing or
/// unparseable are dropped and counted. Throws LoadError on missing columns,
/// non-binary labels, out-of-range probabilities, or zero surviving rows.
LoadResult load(const Table& table, const LoadOptions& options);

/// Uniform sample without replacement of round(fraction * n) rows, sorted,
/// deterministic in seed. Schemas are kept as-is.
Dataset sample(const Dataset& dataset, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Literals and slices

enum class Op { eq, ne, lt, le, ge, gt };

std::string_view op_symbol(Op op);

/// Comparison against a value index; the ordered ops compare bin positions.
struct Literal {
  FeatureIndex feature = 0;
  Op op = Op::eq;
  ValueIndex value = 0;

  friend bool operator==(const Literal&, const Literal&) = default;
};

bool matches(const Literal& literal, ValueIndex cell);
std::string literal_string(const Dataset& dataset, const Literal& literal);

/// Literals joined with " ∧ " in the given order.
std::string predicate_string(const Dataset& dataset, std::span<const Literal> literals);

struct Slice {
  std::vector<Literal> literals;
  std::vector<RowIndex> members;

  std::size_t num_literals() const { return literals.size(); }
  std::size_t size() const { return members.size(); }
};

/// Rows satisfying every literal. Repeated features are allowed here (tree
/// paths), which is why slice_members wraps it with a distinctness check.
std::vector<RowIndex> conjunction_members(const Dataset& dataset,
                                          std::span<const Literal> literals);

/// Evaluates a slice predicate whose literal features are pairwise distinct.
Slice slice_members(const Dataset& dataset, std::vector<Literal> literals);

/// Sorted-range intersection.
std::vector<RowIndex> intersect(std::span<const RowIndex> a, std::span<const RowIndex> b);

/// Parses "A=a1 ∧ B=b1" (also accepts "&" and "AND" as separators, "!=" for
/// ≠). Used by tests and tools to name slices.
std::vector<Literal> parse_predicate(const Dataset& dataset, std::string_view text);

}  // namespace slicelens
