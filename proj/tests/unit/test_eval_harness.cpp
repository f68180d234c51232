#include <doctest.h>

#include <cmath>
#include <sstream>

#include "error.hpp"
#include "eval_harness.hpp"
#include "stats.hpp"

using namespace slicelens;

TEST_CASE("synthetic data has a perfect base model") {
  const auto ds = gen_synthetic(1000, 5, 7);
  CHECK(ds.size() == 1000);
  CHECK(ds.num_features() == 2);
  CHECK(moments(compute_losses(ds).values).mean < 1e-9);

  const auto again = gen_synthetic(1000, 5, 7);
  CHECK(std::equal(ds.column(0).begin(), ds.column(0).end(), again.column(0).begin()));
  CHECK(std::equal(ds.labels().begin(), ds.labels().end(), again.labels().begin()));
  CHECK(gen_synthetic(100, 3, 1, 2).num_features() == 4);
  CHECK_THROWS_AS(gen_synthetic(100, 1, 1), Error);
}

TEST_CASE("label injection") {
  const auto ds = gen_synthetic(2000, 4, 3);
  auto spec = random_injection(ds, 3, 0.0, 11);
  CHECK(spec.slices.size() == 3);
  const auto none = inject(ds, spec);
  CHECK(none.flipped == 0);
  CHECK(std::equal(ds.labels().begin(), ds.labels().end(), none.dataset->labels().begin()));

  spec.flip_probability = 1.0;
  const auto all = inject(ds, spec);
  CHECK(all.flipped == all.truth.size());
  for (auto r : all.truth) CHECK(all.dataset->labels()[r] != ds.labels()[r]);

  spec.flip_probability = 0.5;
  const auto half = inject(ds, spec);
  const double n = static_cast<double>(half.truth.size());
  const double sd = std::sqrt(n * 0.25);
  CHECK(std::abs(static_cast<double>(half.flipped) - 0.5 * n) <= 4 * sd);

  std::vector<std::vector<RowIndex>> members;
  for (const auto& s : spec.slices) members.push_back(conjunction_members(ds, s));
  CHECK(union_of(members) == half.truth);
}

TEST_CASE("union accuracy") {
  const std::vector<RowIndex> truth{1, 2, 3};
  CHECK(union_accuracy(truth, truth).accuracy == 1.0);
  const std::vector<RowIndex> other{7, 8};
  const auto zero = union_accuracy(other, truth);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.accuracy == 0.0);

  std::vector<RowIndex> found, big;
  for (RowIndex i = 0; i < 10; ++i) found.push_back(i);
  for (RowIndex i = 2; i < 22; ++i) big.push_back(i);
  const auto a = union_accuracy(found, big);
  CHECK(a.precision == doctest::Approx(0.8));
  CHECK(a.recall == doctest::Approx(0.4));
  CHECK(a.accuracy == doctest::Approx(0.5333).epsilon(1e-4));

  const std::vector<std::vector<RowIndex>> sets{{1, 2}, {2, 3}};
  const std::vector<std::vector<RowIndex>> truth_sets{{1, 2, 3}};
  CHECK(union_accuracy(sets, truth_sets).accuracy == 1.0);
}

TEST_CASE("r squared") {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
  CHECK(r_squared(x, y) == doctest::Approx(1.0));
  const std::vector<double> flat{1, 3, 1, 3};
  CHECK(r_squared(x, flat) < 0.5);
}

TEST_CASE("a small method comparison keeps LS ahead of CL") {
  BenchmarkOptions o;
  o.n = 3000;
  o.values_per_feature = 20;
  o.num_slices = 5;
  o.seeds = 3;
  const auto rows = method_comparison(o);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].algorithm == Algorithm::lattice);
  CHECK(rows[0].accuracies.size() == 3);
  CHECK(rows[0].mean.accuracy >= rows[2].mean.accuracy);
  const auto tsv = to_tsv(rows);
  CHECK(tsv.rfind("method\t", 0) == 0);
}

TEST_CASE("sampling curve has relative accuracy 1 at full data") {
  const auto base = gen_synthetic(4000, 5, 2);
  const auto injected = inject(base, random_injection(base, 3, 0.5, 5));
  const std::vector<double> fractions{0.25, 1.0};
  SamplingOptions o;
  o.repeats = 1;
  const auto rows = sampling_curve(injected.dataset, fractions, 1, o);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    if (r.fraction == 1.0) CHECK(r.relative_accuracy == doctest::Approx(1.0));
  }
}

TEST_CASE("experiments run by name") {
  const auto out = run_experiment("fdr", {{"runs", 200}, {"alphas", {0.01}}});
  CHECK(out.find("investing\t0.0100") != std::string::npos);
  CHECK_THROWS_AS(run_experiment("nope", nlohmann::json::object()), Error);
}
