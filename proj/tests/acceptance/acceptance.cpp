// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "engine.hpp"
#include "eval_harness.hpp"
#include "lattice_search.hpp"
#include "stats.hpp"
#include "testkit.hpp"
#include "tree_search.hpp"

using namespace slicelens;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::shared_ptr<const LossSummary> losses_of(const Dataset& ds) {
  return std::make_shared<LossSummary>(compute_losses(ds).values);
}

SearchOptions fixed_alpha(double threshold, unsigned workers = 1) {
  SearchOptions o;
  o.effect_threshold = threshold;
  o.fdr_mode = FdrMode::fixed;
  o.alpha = 0.05;
  o.workers = workers;
  return o;
}

double oracle_threshold(std::uint64_t seed) { return 0.3 + 0.1 * static_cast<double>(seed % 4); }

constexpr std::uint64_t kOracleSeeds = 60;

std::vector<std::string> predicates(const Dataset& ds, const std::vector<SliceRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(predicate_string(ds, r.literals));
  return out;
}

std::vector<SliceRecord> records(const QueryResult& q) {
  std::vector<SliceRecord> out;
  for (const auto& s : q.slices) out.push_back(s.record);
  return out;
}

bool same_records(const std::vector<SliceRecord>& a, const std::vector<SliceRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i].stats, &y = b[i].stats;
    if (a[i].key != b[i].key || x.size != y.size || x.effect_size != y.effect_size ||
        x.t_stat != y.t_stat || x.df != y.df || x.p_value != y.p_value ||
        a[i].decision != b[i].decision || a[i].alpha_spent != b[i].alpha_spent)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t slices = 0;
  for (std::uint64_t seed = 1; seed <= kOracleSeeds; ++seed) {
    const auto inst = testkit::random_instance(seed);
    const double t = oracle_threshold(seed);
    const auto want = testkit::brute_force(*inst.dataset, inst.losses, t, 0.05);
    const auto got = lattice_search(inst.dataset, losses_of(*inst.dataset), 1000, fixed_alpha(t));
    if (got.size() != want.size())
      return {false, fmt("seed %llu: %zu slices, oracle %zu", (unsigned long long)seed,
                         got.size(), want.size())};
    for (std::size_t i = 0; i < got.size(); ++i) {
      const auto& s = got[i].stats;
      const auto& w = want[i];
      const bool ok = testkit::named_literals(*inst.dataset, got[i].literals) == w.literals &&
                      s.size == w.size && s.counterpart_size == w.counterpart_size &&
                      std::abs(s.mean_loss - w.mean) < 1e-9 && std::abs(s.var_loss - w.var) < 1e-9 &&
                      std::abs(s.effect_size - w.phi) < 1e-9 && std::abs(s.t_stat - w.t) < 1e-9 &&
                      std::abs(s.df - w.df) < 1e-9 && std::abs(s.p_value - w.p) < 1e-9;
      if (!ok)
        return {false, fmt("seed %llu: slice %zu differs from the oracle",
                           (unsigned long long)seed, i)};
    }
    slices += got.size();
  }
  const double secs = seconds_since(start);
  return {secs < 10.0, fmt("%llu instances, %zu slices identical, %.2fs",
                           (unsigned long long)kOracleSeeds, slices, secs)};
}

Outcome example2() {
  const auto ds = testkit::example2();
  for (auto mode : {FdrMode::investing, FdrMode::fixed}) {
    SearchOptions o;
    o.effect_threshold = 0.6;
    o.fdr_mode = mode;
    const auto got = predicates(*ds, lattice_search(ds, losses_of(*ds), 2, o));
    if (got != std::vector<std::string>{"A=a1", "B=b1 ∧ C=c1"}) {
      std::string joined;
      for (const auto& g : got) joined += "[" + g + "]";
      return {false, std::string(to_string(mode)) + " gave " + joined};
    }
  }
  return {true, "T=0.6 k=2 -> [A=a1, B=b1 ∧ C=c1] (investing and fixed)"};
}

Outcome statistics() {
  // all-0.5 scorer over mixed labels
  std::string csv = "f,label,score\n";
  for (int i = 0; i < 40; ++i) csv += "x" + std::to_string(i % 3) + "," + std::to_string(i % 2) + ",0.5\n";
  const auto ds = testkit::from_csv(csv, ScoreKind::probability);
  const auto losses = compute_losses(*ds).values;
  const double mean_loss = moments(losses).mean;
  const bool loss_ok = std::abs(mean_loss - 0.6931) <= 1e-4;

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(2, 40);
  std::uniform_real_distribution<double> value(0.0, 4.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& v : a) v = value(rng) + 0.3 * (c % 4);
    for (auto& v : b) v = value(rng);
    const auto ours = welch_t(moments(a), moments(b));
    if (!ours) return {false, fmt("case %d: Welch test undefined", c)};
    const auto ref = testkit::textbook_welch(a, b);
    worst = std::max({worst, std::abs(ours->t - ref.t), std::abs(ours->df - ref.df),
                      std::abs(ours->p - ref.p)});
  }
  const bool welch_ok = worst <= 1e-6;

  const double phi = effect_size(Moments{100, 0.6, 0.04}, Moments{100, 0.4, 0.04});
  const bool phi_ok = std::abs(phi - 1.0) <= 1e-9;
  return {loss_ok && welch_ok && phi_ok,
          fmt("log loss %.6f, Welch max abs diff %.2e over 100 cases, phi %.12f", mean_loss,
              worst, phi)};
}

Outcome method_ordering() {
  const auto start = std::chrono::steady_clock::now();
  BenchmarkOptions o;  // n=10000, 20 seeds, k=10
  const auto rows = method_comparison(o);
  const double secs = seconds_since(start);
  double ls = 0, dt = 0, cl = 0;
  for (const auto& r : rows) {
    if (r.algorithm == Algorithm::lattice) ls = r.mean.accuracy;
    if (r.algorithm == Algorithm::tree) dt = r.mean.accuracy;
    if (r.algorithm == Algorithm::cluster) cl = r.mean.accuracy;
  }
  return {ls >= dt && dt >= cl && ls >= 0.7 && secs < 120.0,
          fmt("n=%zu seeds=%zu: LS %.4f, DT %.4f, CL %.4f, %.1fs", o.n, o.seeds, ls, dt, cl,
              secs)};
}

Outcome sampling() {
  const std::vector<double> fractions{1.0 / 128, 1.0 / 64, 1.0 / 16, 1.0 / 4, 1.0};
  constexpr int kSeeds = 10;
  double acc_ls = 0, acc_dt = 0;
  std::vector<double> time_ls(fractions.size()), time_dt(fractions.size());
  SamplingOptions so;
  so.repeats = 5;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto base = gen_synthetic(30000, 5, seed);
    const auto injected = inject(base, random_injection(base, 3, 0.5, seed));
    const auto rows = sampling_curve(injected.dataset, fractions, seed, so);
    for (const auto& r : rows) {
      const auto i = static_cast<std::size_t>(
          std::find(fractions.begin(), fractions.end(), r.fraction) - fractions.begin());
      auto& times = r.algorithm == Algorithm::lattice ? time_ls : time_dt;
      times[i] += r.seconds / kSeeds;
      if (i == 0) (r.algorithm == Algorithm::lattice ? acc_ls : acc_dt) += r.relative_accuracy / kSeeds;
    }
  }
  const double r2_ls = r_squared(fractions, time_ls);
  const double r2_dt = r_squared(fractions, time_dt);
  return {acc_ls >= 0.8 && acc_dt >= 0.8 && r2_ls >= 0.9 && r2_dt >= 0.9,
          fmt("30k rows, fraction 1/128 over %d seeds: relative accuracy LS %.4f, DT %.4f; "
              "R2(time, fraction) LS %.4f, DT %.4f",
              kSeeds, acc_ls, acc_dt, r2_ls, r2_dt)};
}

Outcome fdr_control() {
  const std::vector<FdrMode> policies{FdrMode::investing, FdrMode::bonferroni, FdrMode::bh};
  const std::vector<double> alphas{0.001, 0.005, 0.01};
  const auto rows = fdr_power_sim(policies, alphas, 10000, 2024);
  bool ok = true;
  std::string detail;
  for (double a : alphas) {
    const FdrRow *ai = nullptr, *bf = nullptr, *bh = nullptr;
    for (const auto& r : rows) {
      if (r.alpha != a) continue;
      if (r.policy == FdrMode::investing) ai = &r;
      if (r.policy == FdrMode::bonferroni) bf = &r;
      if (r.policy == FdrMode::bh) bh = &r;
    }
    if (!ai || !bf || !bh) return {false, fmt("alpha %g: missing rows", a)};
    const bool row_ok = ai->mfdr <= a + 3 * ai->mfdr_se && bf->power <= bh->power;
    ok = ok && row_ok;
    detail += fmt("%salpha=%g AI mFDR %.5f (bound %.5f), power BF %.4f <= BH %.4f",
                  detail.empty() ? "" : "; ", a, ai->mfdr, a + 3 * ai->mfdr_se, bf->power,
                  bh->power);
  }
  return {ok, "10000 runs: " + detail};
}

Outcome determinism() {
  for (std::uint64_t seed = 1; seed <= kOracleSeeds; ++seed) {
    const auto inst = testkit::random_instance(seed);
    const auto losses = losses_of(*inst.dataset);
    for (auto mode : {FdrMode::fixed, FdrMode::investing}) {
      auto o = fixed_alpha(oracle_threshold(seed));
      o.fdr_mode = mode;
      const auto ls1 = lattice_search(inst.dataset, losses, 1000, o);
      const auto dt1 = tree_search(inst.dataset, losses, 1000, o);
      for (unsigned w : {2u, 8u}) {
        o.workers = w;
        if (!same_records(ls1, lattice_search(inst.dataset, losses, 1000, o)) ||
            !same_records(dt1, tree_search(inst.dataset, losses, 1000, o)))
          return {false, fmt("seed %llu: %u workers differ from 1", (unsigned long long)seed, w)};
      }
      o.workers = 1;
    }
  }

  // Throughput per depth, log only.
  const auto base = gen_synthetic(100000, 8, 5, 3);
  const auto injected = inject(base, random_injection(base, 5, 0.5, 5));
  const auto losses = losses_of(*injected.dataset);
  std::string log;
  bool monotone = true;
  std::vector<std::vector<double>> rates;
  for (unsigned w = 1; w <= 4; ++w) {
    SearchOptions o;
    o.workers = w;
    o.effect_threshold = 0.4;
    o.max_depth = 3;
    LatticeSearcher s(injected.dataset, losses, o);
    std::vector<double> per_depth;
    std::size_t evals = s.evaluations();
    auto start = std::chrono::steady_clock::now();
    std::size_t depth = s.depth();
    while (s.step(static_cast<std::size_t>(-1))) {
      if (s.depth() != depth) {
        per_depth.push_back(static_cast<double>(s.evaluations() - evals) / seconds_since(start));
        evals = s.evaluations();
        depth = s.depth();
        start = std::chrono::steady_clock::now();
      }
    }
    rates.push_back(per_depth);
  }
  for (std::size_t d = 0; d < rates[0].size(); ++d) {
    log += fmt(" depth%zu:", d + 1);
    for (std::size_t w = 0; w < rates.size(); ++w) {
      const double r = d < rates[w].size() ? rates[w][d] : 0.0;
      log += fmt(" %.0f", r);
      if (w > 0 && d < rates[w - 1].size() && r < rates[w - 1][d]) monotone = false;
    }
  }
  std::printf("# throughput (evaluations/s, 1..4 workers, %u hardware threads):%s -> %s\n",
              std::thread::hardware_concurrency(), log.c_str(),
              monotone ? "monotone" : "not monotone (soft check)");
  return {true, fmt("%llu instances x {lattice, tree} x {fixed, investing} identical for 1/2/8 "
                    "workers; throughput %s",
                    (unsigned long long)kOracleSeeds, monotone ? "monotone" : "not monotone (logged)")};
}

Outcome cache_semantics() {
  std::string detail;
  {
    SearchSession s(testkit::example2(), [] {
      SessionConfig c;
      c.search.effect_threshold = 0.6;
      return c;
    }());
    s.query(2, 0.6);
    const auto before = s.evaluations();
    const auto lower = s.query(2, 0.4);
    if (!lower.cache_only || s.evaluations() != before)
      return {false, "Example-2: lowering T evaluated new slices"};
    const auto raised = s.query(2, 3.0);
    if (raised.cache_only || s.evaluations() <= before)
      return {false, "Example-2: raising T did not resume"};
    detail += fmt("Example-2 evaluations %zu -> %zu on lower, %zu on raise", before, before,
                  s.evaluations());
  }
  {
    const auto base = gen_synthetic(20000, 6, 9, 4);
    const auto injected = inject(base, random_injection(base, 4, 0.5, 9));
    SessionConfig c;
    c.search.effect_threshold = 0.5;
    SearchSession s(injected.dataset, c);
    s.query(2, 0.5);
    const auto before = s.evaluations();
    for (double t : {0.45, 0.3, 0.2, 0.1}) {
      const auto q = s.query(2, t);
      if (!q.cache_only || s.evaluations() != before)
        return {false, fmt("synthetic: lowering T to %.2f evaluated new slices", t)};
    }
    const auto raised = s.query(6, 0.9);
    if (raised.cache_only || s.evaluations() <= before)
      return {false, "synthetic: raising T did not resume"};
    detail += fmt("; synthetic %zu -> %zu on lower (4 steps), %zu on raise", before, before,
                  s.evaluations());
  }
  return {true, detail};
}

Outcome definition1_suite() {
  std::size_t outputs = 0;
  auto check = [&](const std::vector<SliceRecord>& results, const std::vector<SliceRecord>& explored,
                   double t, const std::string& what) -> std::string {
    ++outputs;
    const auto v = testkit::definition1_violations(results, explored, t);
    return v.empty() ? "" : what + ": " + v.front();
  };
  auto searcher_results = [](const Searcher& s) {
    std::vector<SliceRecord> out;
    for (const auto* r : s.results()) out.push_back(*r);
    return out;
  };

  for (std::uint64_t seed = 1; seed <= kOracleSeeds; ++seed) {
    const auto inst = testkit::random_instance(seed);
    const auto losses = losses_of(*inst.dataset);
    const std::string tag = fmt("seed %llu", (unsigned long long)seed);
    for (auto mode : {FdrMode::investing, FdrMode::fixed, FdrMode::bonferroni, FdrMode::bh}) {
      auto o = fixed_alpha(oracle_threshold(seed));
      o.fdr_mode = mode;
      o.min_leaf = 5;
      std::vector<std::unique_ptr<Searcher>> searchers;
      searchers.push_back(std::make_unique<LatticeSearcher>(inst.dataset, losses, o));
      searchers.push_back(std::make_unique<TreeSearcher>(inst.dataset, losses, o));
      for (auto& s : searchers) {
        s->run_until(1000);
        const auto full = searcher_results(*s);
        if (auto e = check(full, s->explored(), o.effect_threshold, tag); !e.empty())
          return {false, e};
        std::vector<std::vector<SliceRecord>> by_k;
        const bool lattice = dynamic_cast<LatticeSearcher*>(s.get()) != nullptr;
        for (std::size_t k = 1; k <= full.size() + 1; ++k) {
          by_k.push_back(lattice ? lattice_search(inst.dataset, losses, k, o)
                                 : tree_search(inst.dataset, losses, k, o));
        }
        if (auto v = testkit::prefix_violations(by_k); !v.empty())
          return {false, tag + " prefix: " + v.front()};
      }
    }
  }

  // Sessions, including Example-2 and threshold moves.
  struct Case {
    std::shared_ptr<const Dataset> ds;
    Algorithm algorithm;
  };
  const auto base = gen_synthetic(5000, 6, 3, 2);
  const auto injected = inject(base, random_injection(base, 4, 0.5, 3));
  const std::vector<Case> cases{{testkit::example2(), Algorithm::lattice},
                                {testkit::example2(), Algorithm::tree},
                                {injected.dataset, Algorithm::lattice},
                                {injected.dataset, Algorithm::tree}};
  for (const auto& c : cases) {
    SessionConfig cfg;
    cfg.algorithm = c.algorithm;
    cfg.search.effect_threshold = 0.6;
    SearchSession s(c.ds, cfg);
    std::vector<std::vector<SliceRecord>> by_k;
    for (double t : {0.6, 0.4, 0.9, 0.3}) {
      const auto q = s.query(5, t);
      const auto saved = s.save();
      std::vector<SliceRecord> explored;
      for (const auto& r : saved.at("search").at("explored"))
        explored.push_back(record_from_json(s.dataset(), r));
      if (auto e = check(records(q), explored, t, "session"); !e.empty()) return {false, e};
    }
    for (std::size_t k = 1; k <= 5; ++k) by_k.push_back(records(s.query(k, 0.3)));
    if (auto v = testkit::prefix_violations(by_k); !v.empty())
      return {false, "session prefix: " + v.front()};
  }
  return {true, fmt("%zu outputs (lattice, tree, sessions; 4 significance modes) satisfy "
                    "phi >= T, rejected, minimal, ordered, prefix-monotone",
                    outputs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle-equivalence", oracle_equivalence},
      {"example-2-trace", example2},
      {"statistics", statistics},
      {"method-ordering", method_ordering},
      {"sampling", sampling},
      {"fdr-control", fdr_control},
      {"determinism-concurrency", determinism},
      {"interactive-cache", cache_semantics},
      {"definition-1-invariants", definition1_suite},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
