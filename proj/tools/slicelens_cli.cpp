// slicelens command-line front end. Links only the C API.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "slicelens/slicelens.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

struct RunConfig {
  std::string data;
  std::string label_column = "label";
  std::string score_column = "score";
  std::string score_kind = "probability";
  std::string algorithm = "lattice";
  std::size_t k = 10;
  double effect_threshold = 0.4;
  double alpha = 0.05;
  int bins = 10;
  int top_values = 50;
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string fdr_mode = "investing";
  std::string output;
  std::string schema;
  std::string delimiter = ",";
  std::string save_session;
};

struct Deleter {
  void operator()(sl_dataset* p) const { sl_dataset_free(p); }
  void operator()(sl_session* p) const { sl_session_free(p); }
  void operator()(sl_result* p) const { sl_result_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  sl_string_free(s);
  return out;
}

int exit_code(sl_status status) {
  switch (status) {
    case SL_OK: return kExitOk;
    case SL_ERR_IO: return kExitIo;
    case SL_ERR_INTERNAL: return kExitIo;
    default: return kExitValidation;
  }
}

int report_failure(sl_status status) {
  std::cerr << "slicelens: " << sl_last_error() << '\n';
  return exit_code(status);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::optional<char> parse_delimiter(const std::string& d) {
  if (d == "tab" || d == "\\t" || d == "\t") return '\t';
  if (d == "comma") return ',';
  if (d.size() == 1) return d[0];
  return std::nullopt;
}

int run(const RunConfig& cfg) {
  const auto delimiter = parse_delimiter(cfg.delimiter);
  if (!delimiter) {
    std::cerr << "slicelens: bad delimiter '" << cfg.delimiter << "'\n";
    return kExitValidation;
  }
  if (cfg.k < 1) {
    std::cerr << "slicelens: --k must be >= 1\n";
    return kExitValidation;
  }

  sl_load_options lo;
  sl_load_options_default(&lo);
  lo.label_column = cfg.label_column.c_str();
  lo.score_column = cfg.score_column.c_str();
  lo.score_kind = cfg.score_kind == "loss" ? SL_SCORE_LOSS : SL_SCORE_PROBABILITY;
  lo.delimiter = *delimiter;
  lo.num_bins = cfg.bins;
  lo.top_values = cfg.top_values;
  lo.schema_path = cfg.schema.empty() ? nullptr : cfg.schema.c_str();

  sl_session_config sc;
  sl_session_config_default(&sc);
  sc.algorithm = cfg.algorithm == "tree"      ? SL_ALGORITHM_TREE
                 : cfg.algorithm == "cluster" ? SL_ALGORITHM_CLUSTER
                                              : SL_ALGORITHM_LATTICE;
  sc.fdr_mode = cfg.fdr_mode == "fixed"        ? SL_FDR_FIXED
                : cfg.fdr_mode == "bonferroni" ? SL_FDR_BONFERRONI
                : cfg.fdr_mode == "bh"         ? SL_FDR_BH
                                               : SL_FDR_INVESTING;
  sc.alpha = cfg.alpha;
  sc.effect_threshold = cfg.effect_threshold;
  sc.sample_fraction = cfg.sample_fraction;
  sc.seed = cfg.seed;
  sc.workers = cfg.workers;

  const auto start = std::chrono::steady_clock::now();
  sl_dataset* raw_dataset = nullptr;
  char* report = nullptr;
  auto status = sl_dataset_load_file(cfg.data.c_str(), &lo, &raw_dataset, &report);
  std::unique_ptr<sl_dataset, Deleter> dataset(raw_dataset);
  const auto report_json = take(report);
  if (status != SL_OK) {
    const auto code = report_failure(status);
    if (!report_json.empty()) std::cerr << report_json << '\n';
    return code;
  }
  char* text = nullptr;
  if (sl_dataset_report_text(dataset.get(), &text) == SL_OK) std::cerr << take(text);
  const double load_seconds = seconds_since(start);

  sl_session* raw_session = nullptr;
  status = sl_session_create(dataset.get(), &sc, &raw_session);
  std::unique_ptr<sl_session, Deleter> session(raw_session);
  if (status != SL_OK) return report_failure(status);

  const auto search_start = std::chrono::steady_clock::now();
  sl_result* raw_result = nullptr;
  status = sl_session_query(session.get(), cfg.k, cfg.effect_threshold, &raw_result);
  std::unique_ptr<sl_result, Deleter> result(raw_result);
  if (status != SL_OK) return report_failure(status);
  const double search_seconds = seconds_since(search_start);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!cfg.output.empty() && cfg.output != "-") {
    file.open(cfg.output, std::ios::binary);
    if (!file) {
      std::cerr << "slicelens: cannot write '" << cfg.output << "'\n";
      return kExitIo;
    }
    out = &file;
  }
  for (std::size_t i = 0; i < sl_result_count(result.get()); ++i) {
    char* line = nullptr;
    status = sl_result_record_json(result.get(), i, &line);
    if (status != SL_OK) return report_failure(status);
    *out << take(line) << '\n';
  }
  char* summary_raw = nullptr;
  status = sl_result_summary_json(result.get(), &summary_raw);
  if (status != SL_OK) return report_failure(status);
  auto summary = nlohmann::json::parse(take(summary_raw));
  summary["schema"] = "slicelens.summary.v1";
  summary["algorithm"] = cfg.algorithm;
  summary["k"] = cfg.k;
  summary["effect_threshold"] = cfg.effect_threshold;
  summary["alpha"] = cfg.alpha;
  summary["fdr_mode"] = cfg.fdr_mode;
  summary["sample_fraction"] = cfg.sample_fraction;
  summary["seed"] = cfg.seed;
  *out << summary.dump() << '\n';
  out->flush();
  if (!*out) {
    std::cerr << "slicelens: write failed\n";
    return kExitIo;
  }

  if (!cfg.save_session.empty()) {
    status = sl_session_save(session.get(), cfg.save_session.c_str());
    if (status != SL_OK) return report_failure(status);
  }
  std::fprintf(stderr, "timing: load %.3fs, search %.3fs\n", load_seconds, search_seconds);
  return kExitOk;
}

int run_eval(const std::string& experiment, const std::string& params_text,
             const std::string& output, const std::optional<std::uint64_t>& seed) {
  nlohmann::json params = nlohmann::json::object();
  if (!params_text.empty()) {
    try {
      params = nlohmann::json::parse(params_text);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "slicelens: --params is not valid JSON: " << e.what() << '\n';
      return kExitValidation;
    }
  }
  if (seed) params["seed"] = *seed;
  char* table = nullptr;
  const auto status = sl_eval_run(experiment.c_str(), params.dump().c_str(), &table);
  if (status != SL_OK) return report_failure(status);
  const auto text = take(table);
  if (output.empty() || output == "-") {
    std::cout << text;
    return kExitOk;
  }
  std::ofstream file(output, std::ios::binary);
  if (!(file << text)) {
    std::cerr << "slicelens: cannot write '" << output << "'\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Find large, interpretable slices where a model underperforms."};
  app.set_version_flag("--version", std::string(sl_version()));
  app.require_subcommand(1);
  // the config file belongs to the root app (CLI11 only reads it there);
  // fallthrough lets it follow the subcommand. Run options go under [run].
  app.set_config("--config", "", "TOML/INI file with a [run] section (flags win)");
  app.fallthrough();

  RunConfig cfg;
  auto* run_cmd = app.add_subcommand("run", "search a dataset for problematic slices");
  run_cmd->add_option("--data", cfg.data, "delimited input table")
      ->required()
      ->envname("SLICELENS_DATA");
  run_cmd->add_option("--label-column", cfg.label_column)->envname("SLICELENS_LABEL_COLUMN");
  run_cmd->add_option("--score-column", cfg.score_column)->envname("SLICELENS_SCORE_COLUMN");
  run_cmd->add_option("--score-kind", cfg.score_kind, "probability or loss")
      ->check(CLI::IsMember({"probability", "loss"}))
      ->envname("SLICELENS_SCORE_KIND");
  run_cmd->add_option("--algorithm", cfg.algorithm)
      ->check(CLI::IsMember({"lattice", "tree", "cluster"}))
      ->envname("SLICELENS_ALGORITHM");
  run_cmd->add_option("--k", cfg.k, "number of slices")->envname("SLICELENS_K");
  run_cmd->add_option("-T,--effect-size-threshold", cfg.effect_threshold)
      ->check(CLI::PositiveNumber)
      ->envname("SLICELENS_EFFECT_SIZE_THRESHOLD");
  run_cmd->add_option("--alpha", cfg.alpha)
      ->check(CLI::Range(0.0, 1.0))
      ->envname("SLICELENS_ALPHA");
  run_cmd->add_option("--bins", cfg.bins)->check(CLI::Range(2, 1000))->envname("SLICELENS_BINS");
  run_cmd->add_option("--top-values", cfg.top_values)
      ->check(CLI::Range(1, 1000000))
      ->envname("SLICELENS_TOP_VALUES");
  run_cmd->add_option("--sample-fraction", cfg.sample_fraction)
      ->envname("SLICELENS_SAMPLE_FRACTION");
  run_cmd->add_option("--seed", cfg.seed)->envname("SLICELENS_SEED");
  run_cmd->add_option("--workers", cfg.workers, "0 = available cores")
      ->envname("SLICELENS_WORKERS");
  run_cmd->add_option("--fdr-mode", cfg.fdr_mode)
      ->check(CLI::IsMember({"investing", "fixed", "bonferroni", "bh"}))
      ->envname("SLICELENS_FDR_MODE");
  run_cmd->add_option("--output", cfg.output, "JSONL output file (default stdout)")
      ->envname("SLICELENS_OUTPUT");
  run_cmd->add_option("--schema", cfg.schema, "schema options file")
      ->envname("SLICELENS_SCHEMA");
  run_cmd->add_option("--delimiter", cfg.delimiter, "field delimiter (',' or 'tab')")
      ->envname("SLICELENS_DELIMITER");
  run_cmd->add_option("--save-session", cfg.save_session, "write a session snapshot");

  auto* eval_cmd = app.add_subcommand("eval", "run an evaluation experiment");
  eval_cmd->require_subcommand(1);
  std::string params;
  std::string eval_output;
  std::optional<std::uint64_t> eval_seed;
  std::string experiment;
  for (const char* name : {"method-comparison", "sampling", "fdr"}) {
    auto* sub = eval_cmd->add_subcommand(name);
    sub->add_option("--params", params, "JSON object of experiment parameters");
    sub->add_option("--seed", eval_seed);
    sub->add_option("--output", eval_output);
    sub->callback([&experiment, name] { experiment = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (run_cmd->parsed()) return run(cfg);
  return run_eval(experiment, params, eval_output, eval_seed);
}
