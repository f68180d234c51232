#include <doctest.h>

#include <random>

#include "eval_harness.hpp"
#include "fdr.hpp"

using namespace slicelens;

TEST_CASE("alpha-investing worked steps") {
  AlphaInvesting ai(0.05);
  const auto d = ai.test(0.001);
  CHECK(d.rejected);
  CHECK(d.alpha_spent == doctest::Approx(0.05 / 1.05));
  CHECK(d.alpha_spent == doctest::Approx(0.0476).epsilon(1e-3));
  CHECK(ai.wealth() == doctest::Approx(0.05));

  const auto e = ai.test(0.9);
  CHECK_FALSE(e.rejected);
  CHECK(ai.wealth() == doctest::Approx(0.0).epsilon(1e-15));

  const auto tests = ai.tests();
  const auto f = ai.test(0.0);
  CHECK_FALSE(f.rejected);
  CHECK(f.alpha_spent == 0.0);
  CHECK(ai.tests() == tests);
  CHECK(ai.wealth() == 0.0);
}

TEST_CASE("alpha-investing wealth stays non-negative") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int run = 0; run < 200; ++run) {
    AlphaInvesting ai(0.05);
    for (int i = 0; i < 50; ++i) {
      const double p = u(rng) < 0.5 ? u(rng) * 1e-3 : u(rng);
      ai.test(p);
      REQUIRE(ai.wealth() >= 0.0);
    }
  }
}

TEST_CASE("zero payout and all-ones stream exhausts wealth") {
  AlphaInvesting ai(0.05, 0.0);
  ai.test(1.0);
  CHECK(ai.wealth() == 0.0);
  for (int i = 0; i < 10; ++i) CHECK_FALSE(ai.test(1e-12).rejected);
}

TEST_CASE("Bonferroni") {
  const std::vector<double> p{0.004, 0.03};
  CHECK(bonferroni(p, 0.05, 10) == std::vector<bool>{true, false});
  CHECK(bonferroni(std::vector<double>{0.049}, 0.05, 1) == std::vector<bool>{true});
  CHECK(bonferroni(std::vector<double>{0.051}, 0.05, 1) == std::vector<bool>{false});
  const std::vector<double> ones{1, 1, 1};
  CHECK(bonferroni(ones, 0.05, 3) == std::vector<bool>{false, false, false});
}

TEST_CASE("Benjamini-Hochberg") {
  const std::vector<double> p{0.01, 0.02, 0.5};
  CHECK(benjamini_hochberg(p, 0.05) == std::vector<bool>{true, true, false});
  const std::vector<double> big{0.2, 0.3};
  CHECK(benjamini_hochberg(big, 0.05) == std::vector<bool>{false, false});
  const std::vector<double> zeros{0, 0, 0};
  CHECK(benjamini_hochberg(zeros, 0.05) == std::vector<bool>{true, true, true});
  // step-up: a large p-value can carry smaller ones with it
  const std::vector<double> step{0.04, 0.041, 0.042};
  CHECK(benjamini_hochberg(step, 0.05) == std::vector<bool>{true, true, true});
}

TEST_CASE("BH rejects a superset of Bonferroni") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p(1 + i % 40);
    for (auto& x : p) x = u(rng) < 0.3 ? u(rng) * 1e-3 : u(rng);
    const auto bf = bonferroni(p, 0.05, p.size());
    const auto bh = benjamini_hochberg(p, 0.05);
    for (std::size_t j = 0; j < p.size(); ++j) REQUIRE((!bf[j] || bh[j]));
  }
}

TEST_CASE("false discovery proportion") {
  const bool five[] = {true, true, true, true, true};
  const bool no_nulls[] = {false, false, false, false, false};
  CHECK(mfdr(five, no_nulls) == 0.0);
  const bool four[] = {true, true, true, true};
  const bool one_null[] = {true, false, false, false};
  CHECK(mfdr(four, one_null) == 0.25);
  const bool none[] = {false, false};
  const bool nulls[] = {true, true};
  CHECK(mfdr(none, nulls) == 0.0);
}

TEST_CASE("significance gate modes") {
  const std::vector<double> p{0.001, 0.04, 0.2, 0.0001};
  SignificanceGate fixed(FdrMode::fixed, 0.05);
  const auto f = fixed.decide(p, 10);
  REQUIRE(f.size() == 4);
  CHECK(f[0].rejected);
  CHECK(f[1].rejected);
  CHECK_FALSE(f[2].rejected);
  CHECK(f[3].rejected);

  SignificanceGate early(FdrMode::fixed, 0.05);
  CHECK(early.decide(p, 1).size() == 1);

  SignificanceGate bf(FdrMode::bonferroni, 0.05);
  const auto b = bf.decide(p, 1);
  REQUIRE(b.size() == 4);
  CHECK(b[0].rejected);
  CHECK_FALSE(b[1].rejected);
  CHECK(b[0].alpha_spent == doctest::Approx(0.0125));

  SignificanceGate ai(FdrMode::investing, 0.05);
  const auto a = ai.decide(p, 10);
  CHECK(a[0].rejected);
  CHECK(ai.investing().tests() >= 2);

  CHECK(parse_fdr_mode("bh") == FdrMode::bh);
  CHECK_FALSE(parse_fdr_mode("nope").has_value());
}

TEST_CASE("simulated mFDR of alpha-investing stays within alpha + 3 SE") {
  const std::vector<FdrMode> policies{FdrMode::investing, FdrMode::bonferroni, FdrMode::bh};
  const std::vector<double> alphas{0.001, 0.005, 0.01};
  const auto rows = fdr_power_sim(policies, alphas, 10000, 42);
  REQUIRE(rows.size() == 9);
  for (const auto& r : rows) {
    if (r.policy == FdrMode::investing) CHECK(r.mfdr <= r.alpha + 3 * r.mfdr_se);
  }
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const auto& bf = rows[3 + i];
    const auto& bh = rows[6 + i];
    CHECK(bf.power <= bh.power);
  }
}

TEST_CASE("vanishing alpha gives vanishing power") {
  const std::vector<FdrMode> policies{FdrMode::investing, FdrMode::bonferroni, FdrMode::bh};
  const std::vector<double> alphas{1e-300};
  for (const auto& r : fdr_power_sim(policies, alphas, 500, 1)) CHECK(r.power < 0.01);
}
