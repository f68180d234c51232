#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "engine.hpp"
#include "fdr.hpp"

namespace slicelens {

/// Two categorical features F1, F2 with values_per_feature values each
/// (labels a0.. and b0..), drawn uniformly; label = (i + j) mod 2 and the
/// frozen model scores the label exactly. Noise features N1.. are uniform
/// over the same number of values and unrelated to the label.
Dataset gen_synthetic(std::size_t n, int values_per_feature, std::uint64_t seed,
                      int noise_features = 0);

struct InjectionSpec {
  std::vector<std::vector<Literal>> slices;
  double flip_probability = 0.5;
  std::uint64_t seed = 0;
};

struct Injected {
  std::shared_ptr<const Dataset> dataset;
  std::vector<RowIndex> truth;  // union of the injected slices' members
  std::size_t flipped = 0;
};

/// Picks num_slices distinct random slices of the forms F1=a, F2=b and
/// F1=a ∧ F2=b (each form equally likely).
InjectionSpec random_injection(const Dataset& dataset, std::size_t num_slices,
                               double flip_probability, std::uint64_t seed);

/// Flips each member of the injected union independently with the spec's
/// probability. Scores are left untouched.
Injected inject(const Dataset& dataset, const InjectionSpec& spec);

struct Accuracy {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;  // harmonic mean
};

std::vector<RowIndex> union_of(std::span<const std::vector<RowIndex>> sets);

Accuracy union_accuracy(std::span<const std::vector<RowIndex>> found,
                        std::span<const std::vector<RowIndex>> truth);
Accuracy union_accuracy(std::span<const RowIndex> found_union,
                        std::span<const RowIndex> truth_union);

// ---------------------------------------------------------------------------
// Method comparison

struct BenchmarkOptions {
  std::size_t n = 10000;
  int values_per_feature = 40;
  int noise_features = 0;
  std::size_t num_slices = 10;
  double flip_probability = 0.5;
  std::size_t k = 10;
  double effect_threshold = 0.4;
  double alpha = 0.05;
  FdrMode fdr_mode = FdrMode::investing;
  std::size_t seeds = 20;
  std::uint64_t base_seed = 1;
  unsigned workers = 1;
};

struct MethodScore {
  Algorithm algorithm = Algorithm::lattice;
  Accuracy mean;
  std::vector<double> accuracies;  // per seed
  double mean_found = 0.0;
  double seconds = 0.0;
};

/// Rows covered by the slices a method reports on `dataset`.
std::vector<RowIndex> found_union(const Dataset& dataset, Algorithm algorithm, std::size_t k,
                                  double threshold, const SearchOptions& search,
                                  std::uint64_t seed, std::size_t* found_count = nullptr);

std::vector<MethodScore> method_comparison(const BenchmarkOptions& options);

// ---------------------------------------------------------------------------
// FDR / power simulation

/// Each run is a stream of `hypotheses` p-values: a null_fraction share of
/// true nulls with p ~ U(0,1) and alternatives with p ~ Beta(alt_beta, 1).
/// The stream is ordered by a key drawn U(0,1) for nulls and U(0, order_rho)
/// for alternatives, so order_rho = 1 is a random order and small values put
/// discoveries early.
struct FdrSimOptions {
  std::size_t hypotheses = 100;
  double null_fraction = 0.8;
  double alt_beta = 0.05;
  double order_rho = 0.1;
  unsigned workers = 1;
};

struct FdrRow {
  FdrMode policy = FdrMode::investing;
  double alpha = 0.0;
  std::size_t runs = 0;
  double mfdr = 0.0;     // sum V / sum R
  double mfdr_se = 0.0;  // delta-method standard error of the ratio
  double fdr = 0.0;      // mean of per-run V / R
  double power = 0.0;    // true rejections / alternatives
  double rejections = 0.0;
};

std::vector<FdrRow> fdr_power_sim(std::span<const FdrMode> policies,
                                  std::span<const double> alpha_grid, std::size_t runs,
                                  std::uint64_t seed, const FdrSimOptions& options = {});

// ---------------------------------------------------------------------------
// Sampling

struct SamplingOptions {
  std::size_t k = 10;
  double effect_threshold = 0.4;
  double alpha = 0.05;
  FdrMode fdr_mode = FdrMode::investing;
  unsigned workers = 1;
  std::size_t repeats = 3;  // timing: best of
};

struct SamplingRow {
  Algorithm algorithm = Algorithm::lattice;
  double fraction = 1.0;
  std::size_t rows = 0;
  std::size_t found = 0;
  double relative_accuracy = 0.0;
  double seconds = 0.0;
};

/// Runs LS and DT on samples of `dataset`. Slices found on a sample are
/// re-evaluated on the full data and compared with the full run's slices.
std::vector<SamplingRow> sampling_curve(std::shared_ptr<const Dataset> dataset,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        const SamplingOptions& options = {});

/// Coefficient of determination of the least-squares line through (x, y).
double r_squared(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Tabular output (tab-separated, header first)

std::string to_tsv(std::span<const MethodScore> rows);
std::string to_tsv(std::span<const FdrRow> rows);
std::string to_tsv(std::span<const SamplingRow> rows);

/// Runs a named experiment ("method-comparison", "sampling", "fdr") with
/// JSON parameters (missing keys take defaults) and returns its table.
std::string run_experiment(std::string_view name, const nlohmann::json& params);

}  // namespace slicelens
