#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "dataset.hpp"
#include "error.hpp"
#include "testkit.hpp"

using namespace slicelens;

namespace {

LoadResult load_text(const std::string& csv, LoadOptions options = {}) {
  return load(parse_table(csv, ','), options);
}

std::size_t count_of(const std::vector<ValueIndex>& column, ValueIndex v) {
  return static_cast<std::size_t>(std::count(column.begin(), column.end(), v));
}

}  // namespace

TEST_CASE("table parsing handles quotes, CRLF and short rows") {
  const auto t = parse_table("a,b,c\r\n\"x,1\",\"say \"\"hi\"\"\",3\r\n4,5\n", ',');
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.num_rows() == 2);
  CHECK(t.columns[0][0] == "x,1");
  CHECK(t.columns[1][0] == "say \"hi\"");
  CHECK(t.columns[2][1] == "");
  CHECK_THROWS_AS(parse_table("a,b\n1,2,3\n", ','), Error);
}

TEST_CASE("rows with a missing label are dropped and counted") {
  const auto r = load_text("f,label,score\nx,1,0.9\ny,,0.2\nx,0,0.1\ny,1,0.7\n");
  CHECK(r.dataset->size() == 3);
  CHECK(r.report.dropped() == 1);
  CHECK(r.report.dropped_missing_label == 1);
  CHECK(r.dataset->source_row(1) == 2);
}

TEST_CASE("clean binary labels and probabilities drop nothing") {
  const auto r = load_text("f,label,score\nx,1,1\ny,0,0\nx,0,0.5\n");
  CHECK(r.report.dropped() == 0);
  CHECK(r.report.rows_kept == 3);
}

TEST_CASE("validation failures name the problem and carry the report") {
  try {
    load_text("f,label\nx,1\n");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("missing score column") != std::string::npos);
    CHECK(e.report().rows_read == 1);
  }
  CHECK_THROWS_AS(load_text("f,label,score\nx,2,0.5\n"), LoadError);
  CHECK_THROWS_AS(load_text("f,label,score\nx,1,1.5\n"), LoadError);
  LoadOptions loss;
  loss.score_kind = ScoreKind::loss;
  CHECK_NOTHROW(load_text("f,label,score\nx,1,1.5\n", loss));
  CHECK_THROWS_AS(load_text("f,label,score\nx,1,-1\n", loss), LoadError);
  CHECK_THROWS_AS(load_text("f,label,score\nx,,0.5\n"), LoadError);
}

TEST_CASE("equi-depth discretization of 1..100 into 4 bins") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const auto s = discretize(v, 4, "x");
  REQUIRE(s.bins.size() == 4);
  // type-7 quantiles of 1..100 at 1/4, 2/4, 3/4
  CHECK(s.bins[0].hi == doctest::Approx(25.75));
  CHECK(s.bins[1].hi == doctest::Approx(50.5));
  CHECK(s.bins[2].hi == doctest::Approx(75.25));
  std::vector<std::size_t> counts(4, 0);
  for (double x : v) ++counts[s.bin_of(x)];
  CHECK(counts == std::vector<std::size_t>{25, 25, 25, 25});
}

TEST_CASE("constant numeric column collapses to one degenerate bin") {
  const std::vector<double> v{5, 5, 5};
  const auto s = discretize(v, 4, "x");
  CHECK(s.bins.size() == 1);
  CHECK(s.bins[0].lo == 5);
  CHECK(s.bins[0].hi == 5);
  CHECK(s.degenerate);
}

TEST_CASE("tied quantiles merge instead of producing empty bins") {
  const std::vector<double> v{1, 1, 1, 1, 2};
  const auto s = discretize(v, 4, "x");
  REQUIRE(s.bins.size() == 2);
  CHECK(s.bin_of(1) == 0);
  CHECK(s.bin_of(2) == 1);
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("numeric partition: every value lands in exactly one bin") {
  std::vector<double> v;
  for (int i = 0; i < 300; ++i) v.push_back(std::sin(i * 0.37) * 10 + (i % 7));
  const auto s = discretize(v, 10, "x");
  for (double x : v) {
    const auto b = s.bin_of(x);
    REQUIRE(b < s.bins.size());
    int holders = 0;
    for (std::size_t i = 0; i < s.bins.size(); ++i) {
      const bool inside = (i == 0 ? x >= s.bins[i].lo : x > s.bins[i].lo) && x <= s.bins[i].hi;
      holders += inside;
    }
    CHECK(holders == 1);
  }
}

TEST_CASE("missing numeric cells get their own value") {
  const auto r = load_text("x,label,score\n1,0,0.1\n2,0,0.1\n,1,0.9\n3,1,0.8\n");
  const auto& s = r.dataset->schema(0);
  REQUIRE(s.kind == FeatureKind::numeric);
  REQUIRE(s.missing.has_value());
  CHECK(s.values[*s.missing] == "MISSING");
  CHECK(r.dataset->column(0)[2] == *s.missing);
  CHECK(r.report.missing_feature_cells == 1);
}

TEST_CASE("rare categorical values are bucketed into OTHER") {
  std::vector<std::string> v;
  for (int i = 0; i < 5; ++i) v.push_back("a");
  for (int i = 0; i < 3; ++i) v.push_back("b");
  v.push_back("c");
  v.push_back("d");
  const auto s = bucket_rare_values(v, 2, "f");
  CHECK(s.values == std::vector<std::string>{"a", "b", "OTHER"});
  REQUIRE(s.other_bucket.has_value());
  CHECK(s.categorical_index("c") == *s.other_bucket);
  CHECK(s.categorical_index("d") == *s.other_bucket);

  std::vector<ValueIndex> column;
  for (const auto& x : v) column.push_back(s.categorical_index(x));
  std::size_t total = 0;
  for (ValueIndex i = 0; i < s.domain_size(); ++i) total += count_of(column, i);
  CHECK(total == v.size());
  CHECK(count_of(column, *s.other_bucket) == 2);
}

TEST_CASE("few distinct values keep no OTHER bucket; a single value is degenerate") {
  const std::vector<std::string> v{"x", "y", "x"};
  CHECK_FALSE(bucket_rare_values(v, 5).other_bucket.has_value());
  const std::vector<std::string> same{"x", "x", "x"};
  const auto s = bucket_rare_values(same, 5);
  CHECK(s.domain_size() == 1);
  CHECK(s.degenerate);
}

TEST_CASE("schema options override kinds, bins and top values") {
  const auto opts = parse_schema_options(
      "# comment\nzip = categorical top=1\nid = ignore\ndefault.bins = 3\n");
  CHECK(opts.num_bins == 3);
  LoadOptions lo;
  lo.schema = opts;
  const auto r = load_text("zip,id,label,score\n1,7,0,0.1\n1,8,0,0.1\n2,9,1,0.9\n", lo);
  REQUIRE(r.dataset->num_features() == 1);
  const auto& s = r.dataset->schema(0);
  CHECK(s.kind == FeatureKind::categorical);
  CHECK(s.values == std::vector<std::string>{"1", "OTHER"});
  CHECK_THROWS_AS(parse_schema_options("zip = weird\n"), Error);
}

TEST_CASE("sampling is deterministic in the seed") {
  std::string csv = "f,label,score\n";
  for (int i = 0; i < 100; ++i) csv += "v" + std::to_string(i % 3) + ",0,0.2\n";
  const auto ds = testkit::from_csv(csv, ScoreKind::probability);

  const auto full = sample(*ds, 1.0, 3);
  CHECK(full.size() == 100);
  for (RowIndex r = 0; r < 100; ++r) CHECK(full.source_row(r) == r);

  const auto a = sample(*ds, 0.5, 11);
  const auto b = sample(*ds, 0.5, 11);
  const auto c = sample(*ds, 0.5, 12);
  REQUIRE(a.size() == 50);
  std::vector<RowIndex> ra, rb, rc;
  for (RowIndex r = 0; r < 50; ++r) {
    ra.push_back(a.source_row(r));
    rb.push_back(b.source_row(r));
    rc.push_back(c.source_row(r));
  }
  CHECK(ra == rb);
  CHECK(ra != rc);
  CHECK(std::is_sorted(ra.begin(), ra.end()));
  CHECK_THROWS_AS(sample(*ds, 0.0, 1), Error);
}

TEST_CASE("slice membership over the Example 2 fixture") {
  const auto ds = testkit::example2();
  const auto root = conjunction_members(*ds, {});
  CHECK(root.size() == ds->size());

  const auto a1 = slice_members(*ds, parse_predicate(*ds, "A=a1"));
  const auto table = read_table_file(testkit::fixture_path("example2.csv"), ',');
  const auto col = *table.column_index("A");
  std::vector<RowIndex> expected;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (table.columns[col][r] == "a1") expected.push_back(static_cast<RowIndex>(r));
  }
  CHECK(a1.members == expected);
  CHECK(literal_string(*ds, a1.literals[0]) == "A=a1");

  // round trip: every two-literal slice matches a scan of the raw table
  const auto b = *table.column_index("B");
  const auto c = *table.column_index("C");
  for (const char* bv : {"b1", "b2"}) {
    for (const char* cv : {"c1", "c2"}) {
      const auto s = slice_members(
          *ds, parse_predicate(*ds, std::string("B=") + bv + " ∧ C=" + cv));
      std::vector<RowIndex> scan;
      for (std::size_t r = 0; r < table.num_rows(); ++r) {
        if (table.columns[b][r] == bv && table.columns[c][r] == cv) {
          scan.push_back(static_cast<RowIndex>(r));
        }
      }
      CHECK(s.members == scan);
    }
  }
}

TEST_CASE("a predicate repeating a feature is rejected") {
  const auto ds = testkit::example2();
  auto literals = parse_predicate(*ds, "A=a1");
  literals.push_back(literals.front());
  CHECK_THROWS_AS(slice_members(*ds, literals), Error);
  CHECK_THROWS_AS(parse_predicate(*ds, "Z=z1"), Error);
}

TEST_CASE("sorted intersection") {
  const std::vector<RowIndex> a{1, 3, 5, 7}, b{2, 3, 4, 7, 9};
  CHECK(intersect(a, b) == std::vector<RowIndex>{3, 7});
}
