#include "slicelens/slicelens.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "eval_harness.hpp"
#include "parallel.hpp"

using namespace slicelens;

struct sl_dataset {
  std::shared_ptr<const Dataset> dataset;
  IngestionReport report;
};

struct sl_session {
  std::unique_ptr<SearchSession> session;
};

struct sl_result {
  std::shared_ptr<const Dataset> dataset;
  QueryResult result;
};

namespace {

thread_local std::string last_error;

sl_status set_error(sl_status status, const std::string& message) {
  last_error = message;
  return status;
}

sl_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return SL_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return SL_ERR_IO;
    case ErrorCode::validation: return SL_ERR_VALIDATION;
    case ErrorCode::not_found: return SL_ERR_NOT_FOUND;
    case ErrorCode::state: return SL_ERR_STATE;
  }
  return SL_ERR_INTERNAL;
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

template <typename Fn>
sl_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return SL_OK;
  } catch (const LoadError& e) {
    return set_error(SL_ERR_VALIDATION, e.what());
  } catch (const Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SL_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(SL_ERR_INTERNAL, "unknown error");
  }
}

#define SL_REQUIRE_ARG(cond, what)                                   \
  do {                                                               \
    if (!(cond)) return set_error(SL_ERR_INVALID_ARGUMENT, (what));  \
  } while (0)

LoadOptions load_options(const sl_load_options* o) {
  sl_load_options defaults;
  sl_load_options_default(&defaults);
  if (!o) o = &defaults;
  LoadOptions out;
  if (o->label_column) out.label_column = o->label_column;
  if (o->score_column) out.score_column = o->score_column;
  out.score_kind = o->score_kind == SL_SCORE_LOSS ? ScoreKind::loss : ScoreKind::probability;
  if (o->schema_path && *o->schema_path) out.schema = read_schema_options_file(o->schema_path);
  if (o->num_bins > 0) out.schema.num_bins = o->num_bins;
  if (o->top_values > 0) out.schema.top_values = o->top_values;
  return out;
}

sl_status load_table(const Table& table, const LoadOptions& options, sl_dataset** out,
                     char** out_report_json) {
  return guarded([&] {
    try {
      auto loaded = load(table, options);
      auto handle = std::make_unique<sl_dataset>();
      handle->dataset = std::move(loaded.dataset);
      handle->report = std::move(loaded.report);
      if (out_report_json) *out_report_json = copy_string(handle->report.to_json().dump());
      *out = handle.release();
    } catch (const LoadError& e) {
      if (out_report_json) *out_report_json = copy_string(e.report().to_json().dump());
      throw;
    }
  });
}

SessionConfig session_config(const sl_session_config* c) {
  SessionConfig out;
  switch (c->algorithm) {
    case SL_ALGORITHM_LATTICE: out.algorithm = Algorithm::lattice; break;
    case SL_ALGORITHM_TREE: out.algorithm = Algorithm::tree; break;
    case SL_ALGORITHM_CLUSTER: out.algorithm = Algorithm::cluster; break;
    default: fail(ErrorCode::invalid_argument, "unknown algorithm");
  }
  switch (c->fdr_mode) {
    case SL_FDR_INVESTING: out.search.fdr_mode = FdrMode::investing; break;
    case SL_FDR_FIXED: out.search.fdr_mode = FdrMode::fixed; break;
    case SL_FDR_BONFERRONI: out.search.fdr_mode = FdrMode::bonferroni; break;
    case SL_FDR_BH: out.search.fdr_mode = FdrMode::bh; break;
    default: fail(ErrorCode::invalid_argument, "unknown fdr mode");
  }
  out.search.alpha = c->alpha;
  out.search.effect_threshold = c->effect_threshold;
  out.search.min_size = c->min_size;
  out.search.max_depth = c->max_depth;
  out.search.min_leaf = c->min_leaf;
  out.search.tree_max_depth = c->tree_max_depth;
  out.search.workers = c->workers == 0 ? default_workers() : c->workers;
  out.sample_fraction = c->sample_fraction;
  out.seed = c->seed;
  out.cluster.workers = out.search.workers;
  out.cluster.min_size = out.search.min_size;
  return out;
}

}  // namespace

extern "C" {

const char* sl_last_error(void) { return last_error.c_str(); }

const char* sl_status_string(sl_status status) {
  switch (status) {
    case SL_OK: return "ok";
    case SL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SL_ERR_IO: return "i/o error";
    case SL_ERR_VALIDATION: return "validation error";
    case SL_ERR_NOT_FOUND: return "not found";
    case SL_ERR_STATE: return "invalid state";
    case SL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sl_version(void) { return "0.1.0"; }

void sl_string_free(char* s) { std::free(s); }

void sl_load_options_default(sl_load_options* options) {
  if (!options) return;
  options->label_column = "label";
  options->score_column = "score";
  options->score_kind = SL_SCORE_PROBABILITY;
  options->delimiter = ',';
  options->num_bins = 10;
  options->top_values = 50;
  options->schema_path = nullptr;
}

sl_status sl_dataset_load_file(const char* path, const sl_load_options* options,
                               sl_dataset** out, char** out_report_json) {
  SL_REQUIRE_ARG(path && out, "path and out must not be NULL");
  *out = nullptr;
  if (out_report_json) *out_report_json = nullptr;
  Table table;
  LoadOptions lo;
  const auto status = guarded([&] {
    lo = load_options(options);
    table = read_table_file(path, options && options->delimiter ? options->delimiter : ',');
  });
  if (status != SL_OK) return status;
  return load_table(table, lo, out, out_report_json);
}

sl_status sl_dataset_load_buffer(const char* data, size_t length, const sl_load_options* options,
                                 sl_dataset** out, char** out_report_json) {
  SL_REQUIRE_ARG((data || length == 0) && out, "data and out must not be NULL");
  *out = nullptr;
  if (out_report_json) *out_report_json = nullptr;
  Table table;
  LoadOptions lo;
  const auto status = guarded([&] {
    lo = load_options(options);
    table = parse_table(std::string_view(data ? data : "", length),
                        options && options->delimiter ? options->delimiter : ',');
  });
  if (status != SL_OK) return status;
  return load_table(table, lo, out, out_report_json);
}

sl_status sl_dataset_sample(const sl_dataset* dataset, double fraction, uint64_t seed,
                            sl_dataset** out) {
  SL_REQUIRE_ARG(dataset && out, "dataset and out must not be NULL");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<sl_dataset>();
    handle->dataset = std::make_shared<const Dataset>(sample(*dataset->dataset, fraction, seed));
    handle->report = dataset->report;
    handle->report.rows_kept = handle->dataset->size();
    *out = handle.release();
  });
}

size_t sl_dataset_rows(const sl_dataset* dataset) {
  return dataset ? dataset->dataset->size() : 0;
}

size_t sl_dataset_features(const sl_dataset* dataset) {
  return dataset ? dataset->dataset->num_features() : 0;
}

sl_status sl_dataset_report_json(const sl_dataset* dataset, char** out) {
  SL_REQUIRE_ARG(dataset && out, "dataset and out must not be NULL");
  return guarded([&] { *out = copy_string(dataset->report.to_json().dump()); });
}

sl_status sl_dataset_report_text(const sl_dataset* dataset, char** out) {
  SL_REQUIRE_ARG(dataset && out, "dataset and out must not be NULL");
  return guarded([&] { *out = copy_string(dataset->report.to_text()); });
}

void sl_dataset_free(sl_dataset* dataset) { delete dataset; }

void sl_session_config_default(sl_session_config* config) {
  if (!config) return;
  config->algorithm = SL_ALGORITHM_LATTICE;
  config->fdr_mode = SL_FDR_INVESTING;
  config->alpha = 0.05;
  config->effect_threshold = 0.4;
  config->min_size = 2;
  config->max_depth = 0;
  config->min_leaf = 10;
  config->tree_max_depth = 12;
  config->sample_fraction = 1.0;
  config->seed = 0;
  config->workers = 0;
}

sl_status sl_session_create(const sl_dataset* dataset, const sl_session_config* config,
                            sl_session** out) {
  SL_REQUIRE_ARG(dataset && out, "dataset and out must not be NULL");
  *out = nullptr;
  sl_session_config defaults;
  sl_session_config_default(&defaults);
  if (!config) config = &defaults;
  return guarded([&] {
    auto handle = std::make_unique<sl_session>();
    handle->session = std::make_unique<SearchSession>(dataset->dataset, session_config(config));
    *out = handle.release();
  });
}

sl_status sl_session_query(sl_session* session, size_t k, double effect_threshold,
                           sl_result** out) {
  SL_REQUIRE_ARG(session && out, "session and out must not be NULL");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<sl_result>();
    handle->result = session->session->query(k, effect_threshold);
    handle->dataset = session->session->dataset_ptr();
    *out = handle.release();
  });
}

size_t sl_session_evaluations(const sl_session* session) {
  return session ? session->session->evaluations() : 0;
}

sl_status sl_session_drill_down(const sl_session* session, uint64_t slice_id, size_t limit,
                                char** out_json) {
  SL_REQUIRE_ARG(session && out_json, "session and out_json must not be NULL");
  *out_json = nullptr;
  return guarded([&] {
    auto rows = nlohmann::json::array();
    for (const auto& r : session->session->drill_down(slice_id, limit)) {
      rows.push_back({{"row", r.row}, {"label", r.label}, {"score", r.score}, {"loss", r.loss}});
    }
    *out_json = copy_string(rows.dump());
  });
}

sl_status sl_session_save(const sl_session* session, const char* path) {
  SL_REQUIRE_ARG(session && path, "session and path must not be NULL");
  return guarded([&] { session->session->save_file(path); });
}

sl_status sl_session_load(const sl_dataset* dataset, const char* path, sl_session** out) {
  SL_REQUIRE_ARG(dataset && path && out, "dataset, path and out must not be NULL");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<sl_session>();
    handle->session = SearchSession::load_file(dataset->dataset, path);
    *out = handle.release();
  });
}

void sl_session_free(sl_session* session) { delete session; }

size_t sl_result_count(const sl_result* result) {
  return result ? result->result.slices.size() : 0;
}

int sl_result_cache_only(const sl_result* result) {
  return result && result->result.cache_only ? 1 : 0;
}

int sl_result_complete(const sl_result* result) {
  return result && result->result.complete ? 1 : 0;
}

sl_status sl_result_get(const sl_result* result, size_t index, sl_slice_info* out) {
  SL_REQUIRE_ARG(result && out, "result and out must not be NULL");
  if (index >= result->result.slices.size()) {
    return set_error(SL_ERR_NOT_FOUND, "result index out of range");
  }
  const auto& s = result->result.slices[index];
  const auto& st = s.record.stats;
  out->id = s.record.id;
  out->predicate = s.predicate.c_str();
  out->decision = to_string(s.record.decision).data();
  out->num_literals = s.record.num_literals();
  out->size = st.size;
  out->mean_loss = st.mean_loss;
  out->counterpart_loss = st.counterpart_mean;
  out->effect_size = st.effect_size;
  out->t = st.t_stat;
  out->df = st.df;
  out->p = st.p_value;
  out->alpha_spent = s.record.alpha_spent;
  last_error.clear();
  return SL_OK;
}

sl_status sl_result_record_json(const sl_result* result, size_t index, char** out) {
  SL_REQUIRE_ARG(result && out, "result and out must not be NULL");
  *out = nullptr;
  if (index >= result->result.slices.size()) {
    return set_error(SL_ERR_NOT_FOUND, "result index out of range");
  }
  return guarded([&] {
    *out = copy_string(
        slice_record_json(*result->dataset, result->result.slices[index], index + 1).dump());
  });
}

sl_status sl_result_summary_json(const sl_result* result, char** out) {
  SL_REQUIRE_ARG(result && out, "result and out must not be NULL");
  *out = nullptr;
  return guarded([&] {
    const auto& r = result->result;
    nlohmann::json j = {{"summary", true},
                        {"slices", r.slices.size()},
                        {"complete", r.complete},
                        {"exhausted", r.exhausted},
                        {"cache_only", r.cache_only},
                        {"evaluations", r.evaluations},
                        {"explored", r.explored},
                        {"tests", r.tests},
                        {"depth", r.depth},
                        {"rows", result->dataset->size()}};
    *out = copy_string(j.dump());
  });
}

void sl_result_free(sl_result* result) { delete result; }

sl_status sl_eval_run(const char* experiment, const char* params_json, char** out_table) {
  SL_REQUIRE_ARG(experiment && out_table, "experiment and out_table must not be NULL");
  *out_table = nullptr;
  return guarded([&] {
    nlohmann::json params = nlohmann::json::object();
    if (params_json && *params_json) {
      try {
        params = nlohmann::json::parse(params_json);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::invalid_argument, std::string("bad params JSON: ") + e.what());
      }
    }
    *out_table = copy_string(run_experiment(experiment, params));
  });
}

}  // extern "C"
