#include <doctest.h>

#include <algorithm>
#include <set>

#include "lattice_search.hpp"
#include "testkit.hpp"

using namespace slicelens;

namespace {

// The literal domains of the worked example: A:{a1}, B:{b1,b2}, C:{c1}.
std::shared_ptr<const Dataset> tiny_lattice() {
  auto schema = [](std::string name, std::vector<std::string> values) {
    FeatureSchema s;
    s.name = std::move(name);
    s.values = std::move(values);
    return s;
  };
  std::vector<FeatureSchema> schemas{schema("A", {"a1"}), schema("B", {"b1", "b2"}),
                                     schema("C", {"c1"})};
  std::vector<std::vector<ValueIndex>> columns{{0, 0, 0, 0}, {0, 0, 1, 1}, {0, 0, 0, 0}};
  return std::make_shared<Dataset>(schemas, columns, std::vector<std::uint8_t>{0, 0, 0, 0},
                                   std::vector<double>{0.1, 0.2, 0.3, 0.4}, ScoreKind::loss);
}

std::vector<std::string> predicates(const Dataset& ds, const std::vector<Slice>& slices) {
  std::vector<std::string> out;
  for (const auto& s : slices) {
    auto lits = s.literals;
    std::sort(lits.begin(), lits.end(),
              [&](const Literal& a, const Literal& b) { return ds.name_rank(a.feature) < ds.name_rank(b.feature); });
    out.push_back(predicate_string(ds, lits));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> predicates(const Dataset& ds, const std::vector<SliceRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(predicate_string(ds, r.literals));
  return out;
}

std::shared_ptr<const LossSummary> losses_of(const Dataset& ds) {
  return std::make_shared<LossSummary>(compute_losses(ds).values);
}

SearchOptions fixed_alpha(double threshold, double alpha = 0.05) {
  SearchOptions o;
  o.effect_threshold = threshold;
  o.fdr_mode = FdrMode::fixed;
  o.alpha = alpha;
  return o;
}

}  // namespace

TEST_CASE("root expansion over the worked example's domains") {
  const auto ds = tiny_lattice();
  const std::vector<Slice> root{Slice{{}, conjunction_members(*ds, {})}};
  const auto level1 = expand_slices(*ds, root, {});
  CHECK(predicates(*ds, level1) == std::vector<std::string>{"A=a1", "B=b1", "B=b2", "C=c1"});
}

TEST_CASE("expansion skips slices subsumed by a problematic slice") {
  const auto ds = tiny_lattice();
  const std::vector<Slice> root{Slice{{}, conjunction_members(*ds, {})}};
  const auto level1 = expand_slices(*ds, root, {});
  std::vector<Slice> rest;
  std::vector<std::vector<Literal>> problematic;
  for (const auto& s : level1) {
    if (predicate_string(*ds, s.literals) == "A=a1") {
      problematic.push_back(s.literals);
    } else {
      rest.push_back(s);
    }
  }
  const auto level2 = expand_slices(*ds, rest, problematic);
  CHECK(predicates(*ds, level2) == std::vector<std::string>{"B=b1 ∧ C=c1", "B=b2 ∧ C=c1"});
}

TEST_CASE("the same conjunction reached along two paths is generated once") {
  const auto ds = testkit::example2();
  const std::vector<Slice> base{slice_members(*ds, parse_predicate(*ds, "B=b1")),
                                slice_members(*ds, parse_predicate(*ds, "C=c1"))};
  const auto next = expand_slices(*ds, base, {});
  const auto names = predicates(*ds, next);
  CHECK(std::count(names.begin(), names.end(), "B=b1 ∧ C=c1") == 1);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  for (const auto& s : next) CHECK(!s.members.empty());
}

TEST_CASE("worked example end to end") {
  const auto ds = testkit::example2();
  const auto losses = losses_of(*ds);
  for (auto mode : {FdrMode::investing, FdrMode::fixed}) {
    SearchOptions o;
    o.effect_threshold = 0.6;
    o.fdr_mode = mode;
    const auto out = lattice_search(ds, losses, 2, o);
    CHECK(predicates(*ds, out) == std::vector<std::string>{"A=a1", "B=b1 ∧ C=c1"});
  }
}

TEST_CASE("threshold above every effect size gives nothing") {
  const auto ds = testkit::example2();
  const auto out = lattice_search(ds, losses_of(*ds), 10, fixed_alpha(50.0));
  CHECK(out.empty());
}

TEST_CASE("matches the brute-force oracle under fixed-alpha testing") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    CAPTURE(seed);
    const auto inst = testkit::random_instance(seed);
    const double threshold = 0.3 + 0.1 * static_cast<double>(seed % 4);
    const auto expected = testkit::brute_force(*inst.dataset, inst.losses, threshold, 0.05);
    const auto got = lattice_search(inst.dataset, losses_of(*inst.dataset), 1000,
                                    fixed_alpha(threshold));
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(testkit::named_literals(*inst.dataset, got[i].literals) == expected[i].literals);
      CHECK(got[i].stats.size == expected[i].size);
      CHECK(std::abs(got[i].stats.effect_size - expected[i].phi) < 1e-9);
      CHECK(std::abs(got[i].stats.p_value - expected[i].p) < 1e-9);
    }
  }
}

TEST_CASE("outputs satisfy Definition 1 and the monotone-k prefix property") {
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    CAPTURE(seed);
    const auto inst = testkit::random_instance(seed);
    const auto losses = losses_of(*inst.dataset);
    SearchOptions o;
    o.effect_threshold = 0.3;
    LatticeSearcher full(inst.dataset, losses, o);
    full.run_until(1000);
    std::vector<SliceRecord> results;
    for (const auto* r : full.results()) results.push_back(*r);
    CHECK(testkit::definition1_violations(results, full.explored(), 0.3).empty());

    std::vector<std::vector<SliceRecord>> by_k;
    for (std::size_t k = 1; k <= results.size() + 1; ++k) {
      by_k.push_back(lattice_search(inst.dataset, losses, k, o));
    }
    CHECK(testkit::prefix_violations(by_k).empty());
  }
}

TEST_CASE("results do not depend on the worker count") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    const auto inst = testkit::random_instance(seed);
    const auto losses = losses_of(*inst.dataset);
    std::vector<std::vector<CanonicalKey>> runs;
    for (unsigned workers : {1u, 2u, 8u}) {
      SearchOptions o;
      o.effect_threshold = 0.3;
      o.workers = workers;
      std::vector<CanonicalKey> keys;
      for (const auto& r : lattice_search(inst.dataset, losses, 100, o)) keys.push_back(r.key);
      runs.push_back(keys);
    }
    CHECK(runs[0] == runs[1]);
    CHECK(runs[0] == runs[2]);
  }
}

TEST_CASE("a restored searcher continues exactly like an uninterrupted one") {
  const auto inst = testkit::random_instance(321);
  const auto losses = losses_of(*inst.dataset);
  SearchOptions o;
  o.effect_threshold = 0.25;

  LatticeSearcher straight(inst.dataset, losses, o);
  straight.run_until(6);

  LatticeSearcher first(inst.dataset, losses, o);
  first.run_until(2);
  LatticeSearcher second(inst.dataset, losses, o);
  second.restore_state(nlohmann::json::parse(first.save_state().dump()));
  second.run_until(6);

  REQUIRE(straight.results().size() == second.results().size());
  for (std::size_t i = 0; i < straight.results().size(); ++i) {
    CHECK(straight.results()[i]->key == second.results()[i]->key);
    CHECK(straight.results()[i]->alpha_spent == second.results()[i]->alpha_spent);
  }
  CHECK(straight.evaluations() == second.evaluations());
}

TEST_CASE("a depth cap stops the search early") {
  const auto ds = testkit::example2();
  SearchOptions o = fixed_alpha(0.6);
  o.max_depth = 1;
  LatticeSearcher s(ds, losses_of(*ds), o);
  s.run_until(10);
  CHECK(s.exhausted());
  for (const auto& r : s.explored()) CHECK(r.num_literals() <= 1);
}
