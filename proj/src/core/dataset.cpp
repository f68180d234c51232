#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "error.hpp"

namespace slicelens {

namespace {

std::string format_number(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) return std::to_string(x);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing_token(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "null" ||
         s == "NULL" || s == "None";
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string unique_label(const std::vector<std::string>& taken, std::string label) {
  while (std::find(taken.begin(), taken.end(), label) != taken.end()) label += '_';
  return label;
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureSchema

std::optional<ValueIndex> FeatureSchema::find(std::string_view label) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == label) return static_cast<ValueIndex>(i);
  }
  return std::nullopt;
}

ValueIndex FeatureSchema::bin_of(double x) const {
  if (std::isnan(x)) {
    require(missing.has_value(), ErrorCode::validation,
            "feature '" + name + "' has no MISSING value");
    return *missing;
  }
  require(!bins.empty(), ErrorCode::state, "feature '" + name + "' has no bins");
  // bin i covers (bins[i].lo, bins[i].hi]; search upper boundaries
  auto it = std::lower_bound(bins.begin(), bins.end(), x,
                             [](const BinRange& b, double v) { return b.hi < v; });
  if (it == bins.end()) return static_cast<ValueIndex>(bins.size() - 1);
  return static_cast<ValueIndex>(it - bins.begin());
}

ValueIndex FeatureSchema::categorical_index(std::string_view raw) const {
  if (raw.empty()) {
    require(missing.has_value(), ErrorCode::validation,
            "feature '" + name + "' has no MISSING value");
    return *missing;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (other_bucket && i == *other_bucket) continue;
    if (missing && i == *missing) continue;
    if (values[i] == raw) return static_cast<ValueIndex>(i);
  }
  require(other_bucket.has_value(), ErrorCode::validation,
          "value '" + std::string(raw) + "' not in domain of '" + name + "'");
  return *other_bucket;
}

FeatureSchema discretize(std::span<const double> values, int num_bins, std::string name) {
  require(num_bins >= 2, ErrorCode::invalid_argument, "num_bins must be >= 2");

  std::vector<double> sorted;
  sorted.reserve(values.size());
  bool has_missing = false;
  for (double v : values) {
    if (std::isfinite(v)) {
      sorted.push_back(v);
    } else {
      has_missing = true;
    }
  }
  require(!sorted.empty(), ErrorCode::validation,
          "numeric feature '" + name + "' has no finite values");
  std::sort(sorted.begin(), sorted.end());

  const double lo = sorted.front();
  const double hi = sorted.back();
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
  };

  // Keep a cut only if the bin it closes is non-empty; ties and interpolated
  // gaps merge into the next bin.
  std::vector<double> cuts;
  for (int j = 1; j < num_bins; ++j) {
    const double c = quantile(static_cast<double>(j) / num_bins);
    if (!(c < hi)) continue;
    const double prev = cuts.empty() ? -std::numeric_limits<double>::infinity() : cuts.back();
    if (!(c > prev)) continue;
    auto first_above_prev = std::upper_bound(sorted.begin(), sorted.end(), prev);
    if (first_above_prev == sorted.end() || *first_above_prev > c) continue;
    cuts.push_back(c);
  }

  FeatureSchema schema;
  schema.name = std::move(name);
  schema.kind = FeatureKind::numeric;
  double left = lo;
  for (std::size_t i = 0; i <= cuts.size(); ++i) {
    const double right = i < cuts.size() ? cuts[i] : hi;
    schema.bins.push_back({left, right});
    schema.values.push_back((i == 0 ? "[" : "(") + format_number(left) + ", " +
                            format_number(right) + "]");
    left = right;
  }
  if (has_missing) {
    schema.missing = static_cast<ValueIndex>(schema.values.size());
    schema.values.push_back(unique_label(schema.values, std::string(kMissingValue)));
  }
  schema.degenerate = schema.domain_size() <= 1;
  return schema;
}

FeatureSchema bucket_rare_values(std::span<const std::string> values, int top_values,
                                 std::string name) {
  require(top_values >= 1, ErrorCode::invalid_argument, "top_values must be >= 1");

  std::unordered_map<std::string_view, std::size_t> counts;
  std::size_t missing = 0;
  for (const auto& v : values) {
    if (v.empty()) {
      ++missing;
    } else {
      ++counts[v];
    }
  }
  std::vector<std::pair<std::string_view, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_values));
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < keep; ++i) kept.emplace_back(ranked[i].first);
  std::sort(kept.begin(), kept.end());

  FeatureSchema schema;
  schema.name = std::move(name);
  schema.kind = FeatureKind::categorical;
  schema.values = std::move(kept);
  if (ranked.size() > keep) {
    schema.other_bucket = static_cast<ValueIndex>(schema.values.size());
    schema.values.push_back(unique_label(schema.values, std::string(kOtherValue)));
  }
  if (missing > 0) {
    schema.missing = static_cast<ValueIndex>(schema.values.size());
    schema.values.push_back(unique_label(schema.values, std::string(kMissingValue)));
  }
  schema.degenerate = schema.domain_size() <= 1;
  return schema;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<FeatureSchema> schemas, std::vector<std::vector<ValueIndex>> columns,
                 std::vector<std::uint8_t> labels, std::vector<double> scores,
                 ScoreKind score_kind, std::vector<std::vector<double>> raw_numeric,
                 std::vector<RowIndex> source_rows)
    : schemas_(std::move(schemas)),
      columns_(std::move(columns)),
      labels_(std::move(labels)),
      scores_(std::move(scores)),
      score_kind_(score_kind),
      raw_numeric_(std::move(raw_numeric)),
      source_rows_(std::move(source_rows)) {
  const std::size_t n = labels_.size();
  require(n <= std::numeric_limits<RowIndex>::max(), ErrorCode::invalid_argument,
          "too many rows");
  require(columns_.size() == schemas_.size(), ErrorCode::invalid_argument,
          "column count does not match schema count");
  require(scores_.size() == n, ErrorCode::invalid_argument, "score count does not match rows");
  require(source_rows_.empty() || source_rows_.size() == n, ErrorCode::invalid_argument,
          "source row map does not match rows");
  require(raw_numeric_.empty() || raw_numeric_.size() == schemas_.size(),
          ErrorCode::invalid_argument, "raw numeric columns do not match schemas");
  for (auto label : labels_) {
    require(label <= 1, ErrorCode::invalid_argument, "labels must be 0 or 1");
  }
  for (double s : scores_) {
    require(std::isfinite(s), ErrorCode::invalid_argument, "scores must be finite");
    if (score_kind_ == ScoreKind::probability) {
      require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument,
              "probability scores must lie in [0, 1]");
    }
  }

  postings_.resize(schemas_.size());
  for (std::size_t f = 0; f < schemas_.size(); ++f) {
    const auto& col = columns_[f];
    const auto domain = schemas_[f].domain_size();
    require(col.size() == n, ErrorCode::invalid_argument,
            "column '" + schemas_[f].name + "' has wrong length");
    if (!raw_numeric_.empty()) {
      require(raw_numeric_[f].empty() || raw_numeric_[f].size() == n,
              ErrorCode::invalid_argument, "raw numeric column has wrong length");
    }
    auto& lists = postings_[f];
    lists.resize(domain);
    for (std::size_t r = 0; r < n; ++r) {
      require(col[r] < domain, ErrorCode::invalid_argument,
              "value index out of domain for '" + schemas_[f].name + "'");
      lists[col[r]].push_back(static_cast<RowIndex>(r));
    }
  }

  std::vector<FeatureIndex> order(schemas_.size());
  std::iota(order.begin(), order.end(), FeatureIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](FeatureIndex a, FeatureIndex b) {
    return schemas_[a].name < schemas_[b].name;
  });
  name_rank_.resize(schemas_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    name_rank_[order[i]] = static_cast<std::uint32_t>(i);
  }
}

std::span<const double> Dataset::raw_numeric(FeatureIndex f) const {
  if (raw_numeric_.empty()) return {};
  return raw_numeric_.at(f);
}

std::span<const RowIndex> Dataset::posting(FeatureIndex f, ValueIndex v) const {
  return postings_.at(f).at(v);
}

std::optional<FeatureIndex> Dataset::feature_index(std::string_view name) const {
  for (std::size_t f = 0; f < schemas_.size(); ++f) {
    if (schemas_[f].name == name) return static_cast<FeatureIndex>(f);
  }
  return std::nullopt;
}

Dataset Dataset::subset(std::span<const RowIndex> rows) const {
  std::vector<std::vector<ValueIndex>> columns(columns_.size());
  for (std::size_t f = 0; f < columns_.size(); ++f) {
    columns[f].reserve(rows.size());
    for (auto r : rows) columns[f].push_back(columns_[f][r]);
  }
  std::vector<std::vector<double>> raw(raw_numeric_.size());
  for (std::size_t f = 0; f < raw_numeric_.size(); ++f) {
    if (raw_numeric_[f].empty()) continue;
    raw[f].reserve(rows.size());
    for (auto r : rows) raw[f].push_back(raw_numeric_[f][r]);
  }
  std::vector<std::uint8_t> labels;
  std::vector<double> scores;
  std::vector<RowIndex> source;
  labels.reserve(rows.size());
  scores.reserve(rows.size());
  source.reserve(rows.size());
  for (auto r : rows) {
    labels.push_back(labels_[r]);
    scores.push_back(scores_[r]);
    source.push_back(source_row(r));
  }
  return Dataset(schemas_, std::move(columns), std::move(labels), std::move(scores),
                 score_kind_, std::move(raw), std::move(source));
}

Dataset Dataset::with_labels(std::vector<std::uint8_t> labels) const {
  return Dataset(schemas_, columns_, std::move(labels), scores_, score_kind_, raw_numeric_,
                 source_rows_);
}

// ---------------------------------------------------------------------------
// Loading

SchemaOptions parse_schema_options(std::string_view text) {
  SchemaOptions options;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  const auto parse_int = [&](std::string_view v, const std::string& what) {
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(), ErrorCode::validation,
            "schema options line " + std::to_string(line_no) + ": bad " + what);
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    require(eq != std::string_view::npos, ErrorCode::validation,
            "schema options line " + std::to_string(line_no) + ": expected 'name = spec'");
    const std::string key(trim(view.substr(0, eq)));
    std::string_view spec = trim(view.substr(eq + 1));
    require(!key.empty(), ErrorCode::validation,
            "schema options line " + std::to_string(line_no) + ": empty name");

    if (key == "default.bins") {
      options.num_bins = parse_int(spec, "bin count");
      continue;
    }
    if (key == "default.top") {
      options.top_values = parse_int(spec, "top value count");
      continue;
    }

    FeatureOption opt;
    std::istringstream words{std::string(spec)};
    std::string word;
    while (words >> word) {
      if (word == "numeric") {
        opt.kind = FeatureKind::numeric;
      } else if (word == "categorical") {
        opt.kind = FeatureKind::categorical;
      } else if (word == "ignore") {
        opt.ignore = true;
      } else if (word.rfind("bins=", 0) == 0) {
        opt.bins = parse_int(std::string_view(word).substr(5), "bin count");
      } else if (word.rfind("top=", 0) == 0) {
        opt.top_values = parse_int(std::string_view(word).substr(4), "top value count");
      } else {
        fail(ErrorCode::validation,
             "schema options line " + std::to_string(line_no) + ": unknown token '" + word + "'");
      }
    }
    options.features[key] = opt;
  }
  return options;
}

SchemaOptions read_schema_options_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open schema options '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_schema_options(text);
}

nlohmann::json IngestionReport::to_json() const {
  nlohmann::json features_json = nlohmann::json::array();
  for (const auto& f : features) {
    features_json.push_back({{"name", f.name},
                             {"kind", f.kind == FeatureKind::numeric ? "numeric" : "categorical"},
                             {"domain_size", f.domain_size},
                             {"missing_cells", f.missing_cells},
                             {"degenerate", f.degenerate},
                             {"other_bucket", f.has_other_bucket}});
  }
  nlohmann::json out = {{"rows_read", rows_read},
                        {"rows_kept", rows_kept},
                        {"dropped", dropped()},
                        {"dropped_missing_label", dropped_missing_label},
                        {"dropped_bad_score", dropped_bad_score},
                        {"missing_feature_cells", missing_feature_cells},
                        {"features", std::move(features_json)}};
  if (!error.empty()) out["error"] = error;
  return out;
}

std::string IngestionReport::to_text() const {
  std::ostringstream os;
  os << "ingestion: read " << rows_read << " rows, kept " << rows_kept << ", dropped "
     << dropped() << " (missing label " << dropped_missing_label << ", bad score "
     << dropped_bad_score << ")\n";
  for (const auto& f : features) {
    os << "  feature " << f.name << ": "
       << (f.kind == FeatureKind::numeric ? "numeric" : "categorical") << ", " << f.domain_size
       << " values";
    if (f.missing_cells > 0) os << ", " << f.missing_cells << " missing";
    if (f.has_other_bucket) os << ", other-bucket";
    if (f.degenerate) os << ", degenerate";
    os << '\n';
  }
  if (!error.empty()) os << "error: " << error << '\n';
  return os.str();
}

LoadResult load(const Table& table, const LoadOptions& options) {
  IngestionReport report;
  report.rows_read = table.num_rows();
  const auto reject = [&](const std::string& message) -> void {
    report.error = message;
    throw LoadError(message, report);
  };

  const auto label_col = table.column_index(options.label_column);
  if (!label_col) reject("missing label column '" + options.label_column + "'");
  const auto score_col = table.column_index(options.score_column);
  if (!score_col) reject("missing score column '" + options.score_column + "'");

  const auto& raw_labels = table.columns[*label_col];
  const auto& raw_scores = table.columns[*score_col];
  std::vector<RowIndex> keep;
  std::vector<std::uint8_t> labels;
  std::vector<double> scores;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    const auto label = is_missing_token(raw_labels[r]) ? std::nullopt : parse_double(raw_labels[r]);
    if (!label) {
      ++report.dropped_missing_label;
      continue;
    }
    if (*label != 0.0 && *label != 1.0) {
      reject("non-binary labels in column '" + options.label_column + "' (row " +
             std::to_string(r + 2) + ": '" + raw_labels[r] + "')");
    }
    const auto score = is_missing_token(raw_scores[r]) ? std::nullopt : parse_double(raw_scores[r]);
    if (!score || !std::isfinite(*score)) {
      ++report.dropped_bad_score;
      continue;
    }
    if (options.score_kind == ScoreKind::probability && (*score < 0.0 || *score > 1.0)) {
      reject("score column '" + options.score_column + "' has a probability outside [0, 1] (row " +
             std::to_string(r + 2) + ")");
    }
    if (options.score_kind == ScoreKind::loss && *score < 0.0) {
      reject("loss column '" + options.score_column + "' has a negative value (row " +
             std::to_string(r + 2) + ")");
    }
    keep.push_back(static_cast<RowIndex>(r));
    labels.push_back(static_cast<std::uint8_t>(*label));
    scores.push_back(*score);
  }
  report.rows_kept = keep.size();
  if (keep.empty()) reject("no rows survived ingestion");

  std::vector<FeatureSchema> schemas;
  std::vector<std::vector<ValueIndex>> columns;
  std::vector<std::vector<double>> raw_numeric;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *label_col || c == *score_col) continue;
    const auto& name = table.header[c];
    FeatureOption opt;
    if (auto it = options.schema.features.find(name); it != options.schema.features.end()) {
      opt = it->second;
    }
    if (opt.ignore) continue;

    const auto& cells = table.columns[c];
    std::size_t missing = 0;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<double> numeric(keep.size(), std::numeric_limits<double>::quiet_NaN());
    bool all_numeric = true;
    bool any_value = false;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const auto& cell = cells[keep[i]];
      if (is_missing_token(cell)) {
        ++missing;
        continue;
      }
      any_value = true;
      if (!all_numeric) continue;
      const auto v = parse_double(cell);
      if (v && std::isfinite(*v)) {
        numeric[i] = *v;
      } else {
        all_numeric = false;
      }
    }
    if (opt.kind) {
      kind = *opt.kind;
      if (kind == FeatureKind::numeric && !all_numeric) {
        reject("feature '" + name + "' declared numeric but has non-numeric values");
      }
    } else {
      kind = (all_numeric && any_value) ? FeatureKind::numeric : FeatureKind::categorical;
    }
    report.missing_feature_cells += missing;

    std::vector<ValueIndex> column(keep.size());
    FeatureSchema schema;
    if (kind == FeatureKind::numeric) {
      schema = discretize(numeric, opt.bins.value_or(options.schema.num_bins), name);
      for (std::size_t i = 0; i < keep.size(); ++i) column[i] = schema.bin_of(numeric[i]);
      raw_numeric.push_back(std::move(numeric));
    } else {
      std::vector<std::string> values(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto& cell = cells[keep[i]];
        if (!is_missing_token(cell)) values[i] = std::string(trim(cell));
      }
      schema = bucket_rare_values(values, opt.top_values.value_or(options.schema.top_values), name);
      std::unordered_map<std::string_view, ValueIndex> index;
      for (std::size_t v = 0; v < schema.values.size(); ++v) {
        if (schema.other_bucket && v == *schema.other_bucket) continue;
        if (schema.missing && v == *schema.missing) continue;
        index.emplace(schema.values[v], static_cast<ValueIndex>(v));
      }
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (values[i].empty()) {
          column[i] = *schema.missing;
        } else if (auto it = index.find(values[i]); it != index.end()) {
          column[i] = it->second;
        } else {
          column[i] = *schema.other_bucket;
        }
      }
      raw_numeric.emplace_back();
    }
    report.features.push_back({schema.name, schema.kind, schema.domain_size(), missing,
                               schema.degenerate, schema.other_bucket.has_value()});
    schemas.push_back(std::move(schema));
    columns.push_back(std::move(column));
  }

  auto dataset = std::make_shared<const Dataset>(std::move(schemas), std::move(columns),
                                                 std::move(labels), std::move(scores),
                                                 options.score_kind, std::move(raw_numeric), keep);
  return {std::move(dataset), std::move(report)};
}

Dataset sample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::invalid_argument,
          "sample fraction must be in (0, 1]");
  const std::size_t n = dataset.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  require(count > 0, ErrorCode::validation, "sample of size 0");

  std::vector<RowIndex> rows(n);
  std::iota(rows.begin(), rows.end(), RowIndex{0});
  if (count < n) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(count);
    std::sort(rows.begin(), rows.end());
  }
  return dataset.subset(rows);
}

// ---------------------------------------------------------------------------
// Literals and slices

std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::eq: return "=";
    case Op::ne: return "≠";
    case Op::lt: return "<";
    case Op::le: return "≤";
    case Op::ge: return "≥";
    case Op::gt: return ">";
  }
  return "?";
}

bool matches(const Literal& literal, ValueIndex cell) {
  switch (literal.op) {
    case Op::eq: return cell == literal.value;
    case Op::ne: return cell != literal.value;
    case Op::lt: return cell < literal.value;
    case Op::le: return cell <= literal.value;
    case Op::ge: return cell >= literal.value;
    case Op::gt: return cell > literal.value;
  }
  return false;
}

std::string literal_string(const Dataset& dataset, const Literal& literal) {
  const auto& schema = dataset.schema(literal.feature);
  std::string out = schema.name;
  out += op_symbol(literal.op);
  // thresholds on numeric bins read as the bin's upper boundary
  if (schema.kind == FeatureKind::numeric && (literal.op == Op::le || literal.op == Op::gt) &&
      literal.value < schema.bins.size()) {
    out += format_number(schema.bins[literal.value].hi);
  } else {
    out += schema.values.at(literal.value);
  }
  return out;
}

std::string predicate_string(const Dataset& dataset, std::span<const Literal> literals) {
  if (literals.empty()) return "(all)";
  std::string out;
  for (std::size_t i = 0; i < literals.size(); ++i) {
    if (i > 0) out += " ∧ ";
    out += literal_string(dataset, literals[i]);
  }
  return out;
}

std::vector<RowIndex> intersect(std::span<const RowIndex> a, std::span<const RowIndex> b) {
  std::vector<RowIndex> out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<RowIndex> conjunction_members(const Dataset& dataset,
                                          std::span<const Literal> literals) {
  std::vector<const Literal*> equalities;
  std::vector<const Literal*> scans;
  for (const auto& l : literals) {
    require(l.feature < dataset.num_features(), ErrorCode::invalid_argument,
            "literal feature out of range");
    require(l.value < dataset.schema(l.feature).domain_size() || l.op != Op::eq,
            ErrorCode::invalid_argument, "literal value out of range");
    (l.op == Op::eq ? equalities : scans).push_back(&l);
  }

  std::vector<RowIndex> rows;
  if (equalities.empty()) {
    rows.resize(dataset.size());
    std::iota(rows.begin(), rows.end(), RowIndex{0});
  } else {
    std::sort(equalities.begin(), equalities.end(), [&](const Literal* a, const Literal* b) {
      return dataset.posting(a->feature, a->value).size() <
             dataset.posting(b->feature, b->value).size();
    });
    const auto first = dataset.posting(equalities.front()->feature, equalities.front()->value);
    rows.assign(first.begin(), first.end());
    for (std::size_t i = 1; i < equalities.size() && !rows.empty(); ++i) {
      rows = intersect(rows, dataset.posting(equalities[i]->feature, equalities[i]->value));
    }
  }
  for (const Literal* l : scans) {
    const auto column = dataset.column(l->feature);
    std::erase_if(rows, [&](RowIndex r) { return !matches(*l, column[r]); });
  }
  return rows;
}

Slice slice_members(const Dataset& dataset, std::vector<Literal> literals) {
  for (std::size_t i = 0; i < literals.size(); ++i) {
    for (std::size_t j = i + 1; j < literals.size(); ++j) {
      require(literals[i].feature != literals[j].feature, ErrorCode::invalid_argument,
              "slice literals must use distinct features ('" +
                  dataset.schema(literals[i].feature).name + "' repeated)");
    }
  }
  Slice slice;
  slice.members = conjunction_members(dataset, literals);
  slice.literals = std::move(literals);
  return slice;
}

std::vector<Literal> parse_predicate(const Dataset& dataset, std::string_view text) {
  std::vector<std::string_view> parts;
  static constexpr std::string_view separators[] = {"∧", "&", " AND "};
  while (true) {
    std::size_t best = std::string_view::npos;
    std::size_t width = 0;
    for (auto sep : separators) {
      const auto at = text.find(sep);
      if (at < best) {
        best = at;
        width = sep.size();
      }
    }
    parts.push_back(trim(text.substr(0, best)));
    if (best == std::string_view::npos) break;
    text.remove_prefix(best + width);
  }

  struct OpToken {
    std::string_view token;
    Op op;
  };
  static constexpr OpToken ops[] = {{"≠", Op::ne}, {"!=", Op::ne}, {"≤", Op::le},
                                    {"<=", Op::le}, {"≥", Op::ge}, {">=", Op::ge},
                                    {"=", Op::eq},  {"<", Op::lt},  {">", Op::gt}};
  std::vector<Literal> literals;
  for (auto part : parts) {
    if (part.empty() || part == "(all)") continue;
    std::size_t at = std::string_view::npos;
    const OpToken* found = nullptr;
    for (const auto& candidate : ops) {
      const auto pos = part.find(candidate.token);
      if (pos != std::string_view::npos && (found == nullptr || pos < at)) {
        at = pos;
        found = &candidate;
      }
    }
    require(found != nullptr, ErrorCode::validation,
            "cannot parse literal '" + std::string(part) + "'");
    const auto name = trim(part.substr(0, at));
    const auto value = trim(part.substr(at + found->token.size()));
    const auto feature = dataset.feature_index(name);
    require(feature.has_value(), ErrorCode::validation, "unknown feature '" + std::string(name) + "'");
    const auto& schema = dataset.schema(*feature);
    Literal literal{*feature, found->op, 0};
    if (schema.kind == FeatureKind::numeric && (found->op == Op::le || found->op == Op::gt)) {
      const auto x = parse_double(value);
      require(x.has_value(), ErrorCode::validation, "bad threshold '" + std::string(value) + "'");
      bool matched = false;
      for (std::size_t b = 0; b < schema.bins.size(); ++b) {
        if (schema.bins[b].hi == *x) {
          literal.value = static_cast<ValueIndex>(b);
          matched = true;
          break;
        }
      }
      require(matched, ErrorCode::validation,
              "threshold '" + std::string(value) + "' is not a bin boundary of '" + schema.name + "'");
    } else {
      const auto v = schema.find(value);
      require(v.has_value(), ErrorCode::validation,
              "unknown value '" + std::string(value) + "' for '" + schema.name + "'");
      literal.value = *v;
    }
    literals.push_back(literal);
  }
  return literals;
}

}  // namespace slicelens
