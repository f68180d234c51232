#include "eval_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "baselines.hpp"
#include "error.hpp"
#include "lattice_search.hpp"
#include "parallel.hpp"
#include "tree_search.hpp"

namespace slicelens {

namespace {

FeatureSchema categorical_schema(std::string name, char prefix, int values) {
  FeatureSchema s;
  s.name = std::move(name);
  s.kind = FeatureKind::categorical;
  for (int v = 0; v < values; ++v) s.values.push_back(prefix + std::to_string(v));
  s.degenerate = values <= 1;
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Dataset gen_synthetic(std::size_t n, int values_per_feature, std::uint64_t seed,
                      int noise_features) {
  require(n >= 1, ErrorCode::invalid_argument, "synthetic data needs n >= 1");
  require(values_per_feature >= 2, ErrorCode::invalid_argument,
          "values_per_feature must be >= 2 (a single value is degenerate)");
  require(noise_features >= 0, ErrorCode::invalid_argument, "noise_features must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<ValueIndex> value(0, static_cast<ValueIndex>(values_per_feature - 1));
  std::vector<FeatureSchema> schemas{categorical_schema("F1", 'a', values_per_feature),
                                     categorical_schema("F2", 'b', values_per_feature)};
  for (int i = 0; i < noise_features; ++i) {
    schemas.push_back(categorical_schema("N" + std::to_string(i + 1), 'n', values_per_feature));
  }
  std::vector<std::vector<ValueIndex>> columns(schemas.size(), std::vector<ValueIndex>(n));
  std::vector<std::uint8_t> labels(n);
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& c : columns) c[r] = value(rng);
    labels[r] = static_cast<std::uint8_t>((columns[0][r] + columns[1][r]) % 2);
    scores[r] = labels[r];
  }
  return Dataset(std::move(schemas), std::move(columns), std::move(labels), std::move(scores));
}

InjectionSpec random_injection(const Dataset& dataset, std::size_t num_slices,
                               double flip_probability, std::uint64_t seed) {
  require(dataset.num_features() >= 2, ErrorCode::invalid_argument,
          "injection needs features F1 and F2");
  const auto d1 = static_cast<ValueIndex>(dataset.schema(0).domain_size());
  const auto d2 = static_cast<ValueIndex>(dataset.schema(1).domain_size());
  const std::size_t space = d1 + d2 + static_cast<std::size_t>(d1) * d2;
  require(num_slices <= space, ErrorCode::invalid_argument, "more slices than the space holds");

  InjectionSpec spec;
  spec.flip_probability = flip_probability;
  spec.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> form(0, 2);
  std::uniform_int_distribution<ValueIndex> v1(0, d1 - 1);
  std::uniform_int_distribution<ValueIndex> v2(0, d2 - 1);
  std::set<std::vector<std::uint64_t>> seen;
  while (spec.slices.size() < num_slices) {
    std::vector<Literal> literals;
    switch (form(rng)) {
      case 0: literals = {{0, Op::eq, v1(rng)}}; break;
      case 1: literals = {{1, Op::eq, v2(rng)}}; break;
      default: {
        const auto a = v1(rng);
        literals = {{0, Op::eq, a}, {1, Op::eq, v2(rng)}};
      }
    }
    if (seen.insert(canonical_key(dataset, literals)).second) {
      spec.slices.push_back(std::move(literals));
    }
  }
  return spec;
}

Injected inject(const Dataset& dataset, const InjectionSpec& spec) {
  require(spec.flip_probability >= 0.0 && spec.flip_probability <= 1.0,
          ErrorCode::invalid_argument, "flip probability must be in [0, 1]");
  std::vector<std::vector<RowIndex>> members;
  for (const auto& s : spec.slices) members.push_back(conjunction_members(dataset, s));
  Injected out;
  out.truth = union_of(members);
  std::vector<std::uint8_t> labels(dataset.labels().begin(), dataset.labels().end());
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution flip(spec.flip_probability);
  for (auto r : out.truth) {
    if (flip(rng)) {
      labels[r] ^= 1U;
      ++out.flipped;
    }
  }
  out.dataset = std::make_shared<const Dataset>(dataset.with_labels(std::move(labels)));
  return out;
}

std::vector<RowIndex> union_of(std::span<const std::vector<RowIndex>> sets) {
  std::vector<RowIndex> out;
  for (const auto& s : sets) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Accuracy union_accuracy(std::span<const RowIndex> found, std::span<const RowIndex> truth) {
  const auto overlap = static_cast<double>(intersect(found, truth).size());
  Accuracy a;
  a.precision = found.empty() ? 0.0 : overlap / static_cast<double>(found.size());
  a.recall = truth.empty() ? 0.0 : overlap / static_cast<double>(truth.size());
  a.accuracy = a.precision + a.recall > 0.0
                   ? 2.0 * a.precision * a.recall / (a.precision + a.recall)
                   : 0.0;
  return a;
}

Accuracy union_accuracy(std::span<const std::vector<RowIndex>> found,
                        std::span<const std::vector<RowIndex>> truth) {
  const auto f = union_of(found);
  const auto t = union_of(truth);
  return union_accuracy(std::span<const RowIndex>(f), std::span<const RowIndex>(t));
}

std::vector<RowIndex> found_union(const Dataset& dataset, Algorithm algorithm, std::size_t k,
                                  double threshold, const SearchOptions& search,
                                  std::uint64_t seed, std::size_t* found_count) {
  auto shared = std::shared_ptr<const Dataset>(&dataset, [](const Dataset*) {});
  auto losses = std::make_shared<const LossSummary>(compute_losses(dataset).values);
  auto options = search;
  options.effect_threshold = threshold;
  std::vector<std::vector<RowIndex>> members;
  if (algorithm == Algorithm::cluster) {
    ClusterOptions co;
    co.workers = options.workers;
    co.min_size = options.min_size;
    for (auto& c : cluster_slices(dataset, *losses, k, threshold, seed, co)) {
      if (c.flagged) members.push_back(std::move(c.members));
    }
  } else {
    const auto records = algorithm == Algorithm::lattice
                             ? lattice_search(shared, losses, k, options)
                             : tree_search(shared, losses, k, options);
    for (const auto& r : records) members.push_back(conjunction_members(dataset, r.literals));
  }
  if (found_count) *found_count = members.size();
  return union_of(members);
}

std::vector<MethodScore> method_comparison(const BenchmarkOptions& options) {
  require(options.seeds >= 1, ErrorCode::invalid_argument, "need at least one seed");
  const Algorithm algorithms[] = {Algorithm::lattice, Algorithm::tree, Algorithm::cluster};
  std::vector<MethodScore> scores(3);
  for (std::size_t m = 0; m < 3; ++m) scores[m].algorithm = algorithms[m];

  SearchOptions search;
  search.alpha = options.alpha;
  search.fdr_mode = options.fdr_mode;
  search.workers = options.workers;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const auto seed = options.base_seed + s;
    const auto base =
        gen_synthetic(options.n, options.values_per_feature, seed, options.noise_features);
    const auto spec =
        random_injection(base, options.num_slices, options.flip_probability, seed * 7919 + 1);
    const auto injected = inject(base, spec);
    for (auto& score : scores) {
      const auto start = std::chrono::steady_clock::now();
      std::size_t found = 0;
      const auto u = found_union(*injected.dataset, score.algorithm, options.k,
                                 options.effect_threshold, search, seed, &found);
      score.seconds += seconds_since(start);
      const auto a = union_accuracy(std::span<const RowIndex>(u),
                                    std::span<const RowIndex>(injected.truth));
      score.accuracies.push_back(a.accuracy);
      score.mean.precision += a.precision;
      score.mean.recall += a.recall;
      score.mean.accuracy += a.accuracy;
      score.mean_found += static_cast<double>(found);
    }
  }
  const auto runs = static_cast<double>(options.seeds);
  for (auto& score : scores) {
    score.mean.precision /= runs;
    score.mean.recall /= runs;
    score.mean.accuracy /= runs;
    score.mean_found /= runs;
  }
  return scores;
}

// ---------------------------------------------------------------------------

std::vector<FdrRow> fdr_power_sim(std::span<const FdrMode> policies,
                                  std::span<const double> alpha_grid, std::size_t runs,
                                  std::uint64_t seed, const FdrSimOptions& options) {
  require(runs >= 2, ErrorCode::invalid_argument, "need at least two runs");
  require(options.hypotheses >= 1, ErrorCode::invalid_argument, "need at least one hypothesis");
  require(options.null_fraction >= 0.0 && options.null_fraction <= 1.0,
          ErrorCode::invalid_argument, "null fraction must be in [0, 1]");
  require(options.alt_beta > 0.0 && options.order_rho > 0.0 && options.order_rho <= 1.0,
          ErrorCode::invalid_argument, "bad mixture parameters");

  struct Cell {
    std::vector<double> v;
    std::vector<double> r;
    double true_rejections = 0.0;
    double alternatives = 0.0;
  };
  std::vector<Cell> cells(policies.size() * alpha_grid.size());
  for (auto& c : cells) {
    c.v.assign(runs, 0.0);
    c.r.assign(runs, 0.0);
  }
  std::vector<double> alternatives(runs, 0.0);

  const auto m = options.hypotheses;
  const auto nulls = static_cast<std::size_t>(std::llround(options.null_fraction * m));
  parallel_for(runs, options.workers, [&](std::size_t run) {
    std::mt19937_64 rng(seed + 0x632be59bd9b4e019ULL * (run + 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    struct H {
      double key;
      double p;
      bool null;
    };
    std::vector<H> stream(m);
    for (std::size_t i = 0; i < m; ++i) {
      const bool is_null = i < nulls;
      const double p = is_null ? u(rng) : std::pow(u(rng), 1.0 / options.alt_beta);
      const double key = is_null ? u(rng) : options.order_rho * u(rng);
      stream[i] = {key, p, is_null};
    }
    std::sort(stream.begin(), stream.end(), [](const H& a, const H& b) { return a.key < b.key; });
    std::vector<double> p(m);
    for (std::size_t i = 0; i < m; ++i) p[i] = stream[i].p;
    alternatives[run] = static_cast<double>(m - nulls);

    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
      for (std::size_t q = 0; q < policies.size(); ++q) {
        std::vector<bool> rejected(m, false);
        switch (policies[q]) {
          case FdrMode::investing: {
            AlphaInvesting ai(alpha_grid[a]);
            for (std::size_t i = 0; i < m; ++i) rejected[i] = ai.test(p[i]).rejected;
            break;
          }
          case FdrMode::fixed:
            for (std::size_t i = 0; i < m; ++i) rejected[i] = p[i] <= alpha_grid[a];
            break;
          case FdrMode::bonferroni: rejected = bonferroni(p, alpha_grid[a], m); break;
          case FdrMode::bh: rejected = benjamini_hochberg(p, alpha_grid[a]); break;
        }
        double v = 0.0;
        double r = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          if (!rejected[i]) continue;
          r += 1.0;
          if (stream[i].null) v += 1.0;
        }
        auto& cell = cells[q * alpha_grid.size() + a];
        cell.v[run] = v;
        cell.r[run] = r;
      }
    }
  });

  const double total_alternatives = std::accumulate(alternatives.begin(), alternatives.end(), 0.0);
  std::vector<FdrRow> out;
  for (std::size_t q = 0; q < policies.size(); ++q) {
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
      const auto& cell = cells[q * alpha_grid.size() + a];
      FdrRow row;
      row.policy = policies[q];
      row.alpha = alpha_grid[a];
      row.runs = runs;
      const double sv = std::accumulate(cell.v.begin(), cell.v.end(), 0.0);
      const double sr = std::accumulate(cell.r.begin(), cell.r.end(), 0.0);
      const double n = static_cast<double>(runs);
      row.rejections = sr / n;
      row.mfdr = sr > 0.0 ? sv / sr : 0.0;
      double ss = 0.0;
      double fdr = 0.0;
      for (std::size_t i = 0; i < runs; ++i) {
        const double d = cell.v[i] - row.mfdr * cell.r[i];
        ss += d * d;
        fdr += cell.r[i] > 0.0 ? cell.v[i] / cell.r[i] : 0.0;
      }
      row.mfdr_se = sr > 0.0 ? std::sqrt(ss / (n * (n - 1.0))) / (sr / n) : 0.0;
      row.fdr = fdr / n;
      row.power = total_alternatives > 0.0 ? (sr - sv) / total_alternatives : 0.0;
      out.push_back(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<SamplingRow> sampling_curve(std::shared_ptr<const Dataset> dataset,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        const SamplingOptions& options) {
  require(dataset != nullptr, ErrorCode::invalid_argument, "sampling needs a dataset");
  SearchOptions search;
  search.alpha = options.alpha;
  search.fdr_mode = options.fdr_mode;
  search.workers = options.workers;
  search.effect_threshold = options.effect_threshold;

  std::vector<SamplingRow> out;
  for (auto algorithm : {Algorithm::lattice, Algorithm::tree}) {
    const auto full = found_union(*dataset, algorithm, options.k, options.effect_threshold,
                                  search, seed);
    for (double fraction : fractions) {
      SamplingRow row;
      row.algorithm = algorithm;
      row.fraction = fraction;
      row.seconds = std::numeric_limits<double>::infinity();
      std::vector<SliceRecord> records;
      for (std::size_t rep = 0; rep < std::max<std::size_t>(options.repeats, 1); ++rep) {
        const auto start = std::chrono::steady_clock::now();
        auto part = std::make_shared<const Dataset>(sample(*dataset, fraction, seed));
        auto losses = std::make_shared<const LossSummary>(compute_losses(*part).values);
        row.rows = part->size();
        records = algorithm == Algorithm::lattice
                      ? lattice_search(part, losses, options.k, search)
                      : tree_search(part, losses, options.k, search);
        row.seconds = std::min(row.seconds, seconds_since(start));
      }
      std::vector<std::vector<RowIndex>> members;
      for (const auto& r : records) members.push_back(conjunction_members(*dataset, r.literals));
      const auto u = union_of(members);
      row.found = records.size();
      row.relative_accuracy =
          union_accuracy(std::span<const RowIndex>(u), std::span<const RowIndex>(full)).accuracy;
      out.push_back(row);
    }
  }
  return out;
}

double r_squared(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_argument,
          "r_squared needs two equally long series of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed(double x, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

}  // namespace

std::string to_tsv(std::span<const MethodScore> rows) {
  std::string out = "method\tprecision\trecall\taccuracy\tmean_found\tseconds\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.algorithm)) + '\t' + fixed(r.mean.precision) + '\t' +
           fixed(r.mean.recall) + '\t' + fixed(r.mean.accuracy) + '\t' + fixed(r.mean_found, 2) +
           '\t' + fixed(r.seconds, 3) + '\n';
  }
  return out;
}

std::string to_tsv(std::span<const FdrRow> rows) {
  std::string out = "policy\talpha\truns\tmfdr\tmfdr_se\tfdr\tpower\trejections\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.policy)) + '\t' + fixed(r.alpha, 4) + '\t' +
           std::to_string(r.runs) + '\t' + fixed(r.mfdr, 6) + '\t' + fixed(r.mfdr_se, 6) + '\t' +
           fixed(r.fdr, 6) + '\t' + fixed(r.power) + '\t' + fixed(r.rejections, 3) + '\n';
  }
  return out;
}

std::string to_tsv(std::span<const SamplingRow> rows) {
  std::string out = "method\tfraction\trows\tfound\trelative_accuracy\tseconds\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.algorithm)) + '\t' + fixed(r.fraction, 6) + '\t' +
           std::to_string(r.rows) + '\t' + std::to_string(r.found) + '\t' +
           fixed(r.relative_accuracy) + '\t' + fixed(r.seconds, 4) + '\n';
  }
  return out;
}

}  // namespace slicelens

namespace slicelens {

namespace {

template <typename T>
T param(const nlohmann::json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::invalid_argument, std::string("bad value for parameter '") + key + "'");
  }
}

FdrMode mode_param(const nlohmann::json& params, const char* key, FdrMode fallback) {
  if (!params.contains(key)) return fallback;
  const auto mode = parse_fdr_mode(param<std::string>(params, key, ""));
  require(mode.has_value(), ErrorCode::invalid_argument,
          std::string("unknown fdr mode for '") + key + "'");
  return *mode;
}

std::string run_sampling(const nlohmann::json& params) {
  const auto n = param<std::size_t>(params, "n", 30000);
  const auto seed = param<std::uint64_t>(params, "seed", 1);
  const auto base = gen_synthetic(n, param<int>(params, "values_per_feature", 5), seed,
                                  param<int>(params, "noise_features", 0));
  const auto injected =
      inject(base, random_injection(base, param<std::size_t>(params, "num_slices", 3),
                                    param<double>(params, "flip_probability", 0.5),
                                    seed * 31 + 7));
  SamplingOptions o;
  o.k = param<std::size_t>(params, "k", o.k);
  o.effect_threshold = param<double>(params, "effect_threshold", o.effect_threshold);
  o.alpha = param<double>(params, "alpha", o.alpha);
  o.fdr_mode = mode_param(params, "fdr_mode", o.fdr_mode);
  o.workers = param<unsigned>(params, "workers", o.workers);
  o.repeats = param<std::size_t>(params, "repeats", o.repeats);
  const auto fractions = param<std::vector<double>>(
      params, "fractions", {1.0 / 128, 1.0 / 64, 1.0 / 16, 1.0 / 4, 1.0});
  const auto rows = sampling_curve(injected.dataset, fractions, seed, o);
  auto out = to_tsv(rows);
  for (auto algorithm : {Algorithm::lattice, Algorithm::tree}) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : rows) {
      if (r.algorithm != algorithm) continue;
      x.push_back(r.fraction);
      y.push_back(r.seconds);
    }
    if (x.size() >= 2) {
      out += "# r2_time_vs_fraction\t" + std::string(to_string(algorithm)) + '\t' +
             std::to_string(r_squared(x, y)) + '\n';
    }
  }
  return out;
}

}  // namespace

std::string run_experiment(std::string_view name, const nlohmann::json& params) {
  require(params.is_object() || params.is_null(), ErrorCode::invalid_argument,
          "experiment parameters must be a JSON object");
  if (name == "method-comparison") {
    BenchmarkOptions o;
    o.n = param<std::size_t>(params, "n", o.n);
    o.values_per_feature = param<int>(params, "values_per_feature", o.values_per_feature);
    o.noise_features = param<int>(params, "noise_features", o.noise_features);
    o.num_slices = param<std::size_t>(params, "num_slices", o.num_slices);
    o.flip_probability = param<double>(params, "flip_probability", o.flip_probability);
    o.k = param<std::size_t>(params, "k", o.k);
    o.effect_threshold = param<double>(params, "effect_threshold", o.effect_threshold);
    o.alpha = param<double>(params, "alpha", o.alpha);
    o.fdr_mode = mode_param(params, "fdr_mode", o.fdr_mode);
    o.seeds = param<std::size_t>(params, "seeds", o.seeds);
    o.base_seed = param<std::uint64_t>(params, "seed", o.base_seed);
    o.workers = param<unsigned>(params, "workers", o.workers);
    const auto rows = method_comparison(o);
    return to_tsv(rows);
  }
  if (name == "sampling") return run_sampling(params);
  if (name == "fdr") {
    std::vector<FdrMode> policies;
    for (const auto& p : param<std::vector<std::string>>(params, "policies",
                                                         {"investing", "bonferroni", "bh"})) {
      const auto mode = parse_fdr_mode(p);
      require(mode.has_value(), ErrorCode::invalid_argument, "unknown policy '" + p + "'");
      policies.push_back(*mode);
    }
    const auto alphas =
        param<std::vector<double>>(params, "alphas", {0.001, 0.0025, 0.005, 0.0075, 0.01});
    FdrSimOptions o;
    o.hypotheses = param<std::size_t>(params, "hypotheses", o.hypotheses);
    o.null_fraction = param<double>(params, "null_fraction", o.null_fraction);
    o.alt_beta = param<double>(params, "alt_beta", o.alt_beta);
    o.order_rho = param<double>(params, "order_rho", o.order_rho);
    o.workers = param<unsigned>(params, "workers", o.workers);
    const auto rows = fdr_power_sim(policies, alphas, param<std::size_t>(params, "runs", 10000),
                                    param<std::uint64_t>(params, "seed", 1), o);
    return to_tsv(rows);
  }
  fail(ErrorCode::invalid_argument, "unknown experiment '" + std::string(name) + "'");
}

}  // namespace slicelens
