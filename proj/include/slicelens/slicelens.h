/* slicelens: find large, interpretable data slices where a model underperforms. */
#ifndef SLICELENS_SLICELENS_H
#define SLICELENS_SLICELENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SL_API __declspec(dllexport)
#else
#define SL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sl_dataset sl_dataset;
typedef struct sl_session sl_session;
typedef struct sl_result sl_result;

typedef enum sl_status {
  SL_OK = 0,
  SL_ERR_INVALID_ARGUMENT = 1,
  SL_ERR_IO = 2,
  SL_ERR_VALIDATION = 3,
  SL_ERR_NOT_FOUND = 4,
  SL_ERR_STATE = 5,
  SL_ERR_INTERNAL = 6
} sl_status;

/* Message of the last failed call on this thread; never NULL. */
SL_API const char* sl_last_error(void);
SL_API const char* sl_status_string(sl_status status);
SL_API const char* sl_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
SL_API void sl_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

typedef enum sl_score_kind {
  SL_SCORE_PROBABILITY = 0, /* P(y = 1); log loss is computed per example */
  SL_SCORE_LOSS = 1         /* precomputed per-example loss, >= 0 */
} sl_score_kind;

typedef struct sl_load_options {
  const char* label_column;
  const char* score_column;
  sl_score_kind score_kind;
  char delimiter;
  int num_bins;
  int top_values;
  const char* schema_path; /* optional schema options file, may be NULL */
} sl_load_options;

SL_API void sl_load_options_default(sl_load_options* options);

/* On SL_ERR_VALIDATION the ingestion report is still written to
 * *out_report_json when out_report_json is not NULL. */
SL_API sl_status sl_dataset_load_file(const char* path, const sl_load_options* options,
                                      sl_dataset** out, char** out_report_json);
SL_API sl_status sl_dataset_load_buffer(const char* data, size_t length,
                                        const sl_load_options* options, sl_dataset** out,
                                        char** out_report_json);
SL_API sl_status sl_dataset_sample(const sl_dataset* dataset, double fraction, uint64_t seed,
                                   sl_dataset** out);
SL_API size_t sl_dataset_rows(const sl_dataset* dataset);
SL_API size_t sl_dataset_features(const sl_dataset* dataset);
SL_API sl_status sl_dataset_report_json(const sl_dataset* dataset, char** out);
SL_API sl_status sl_dataset_report_text(const sl_dataset* dataset, char** out);
SL_API void sl_dataset_free(sl_dataset* dataset);

/* ---- sessions ---------------------------------------------------------- */

typedef enum sl_algorithm {
  SL_ALGORITHM_LATTICE = 0,
  SL_ALGORITHM_TREE = 1,
  SL_ALGORITHM_CLUSTER = 2
} sl_algorithm;

typedef enum sl_fdr_mode {
  SL_FDR_INVESTING = 0,
  SL_FDR_FIXED = 1,
  SL_FDR_BONFERRONI = 2,
  SL_FDR_BH = 3
} sl_fdr_mode;

typedef struct sl_session_config {
  sl_algorithm algorithm;
  sl_fdr_mode fdr_mode;
  double alpha;
  double effect_threshold; /* initial T, used until the first query */
  size_t min_size;
  size_t max_depth; /* lattice; 0 = number of features */
  size_t min_leaf;
  size_t tree_max_depth;
  double sample_fraction;
  uint64_t seed;
  unsigned workers; /* 0 = available cores */
} sl_session_config;

SL_API void sl_session_config_default(sl_session_config* config);

/* The session keeps its own reference to the dataset. */
SL_API sl_status sl_session_create(const sl_dataset* dataset, const sl_session_config* config,
                                   sl_session** out);
SL_API sl_status sl_session_query(sl_session* session, size_t k, double effect_threshold,
                                  sl_result** out);
SL_API size_t sl_session_evaluations(const sl_session* session);
/* JSON array of {row, label, score, loss}. */
SL_API sl_status sl_session_drill_down(const sl_session* session, uint64_t slice_id,
                                       size_t limit, char** out_json);
SL_API sl_status sl_session_save(const sl_session* session, const char* path);
SL_API sl_status sl_session_load(const sl_dataset* dataset, const char* path, sl_session** out);
SL_API void sl_session_free(sl_session* session);

/* ---- results ----------------------------------------------------------- */

typedef struct sl_slice_info {
  uint64_t id;
  const char* predicate; /* valid while the result lives */
  const char* decision;
  size_t num_literals;
  size_t size;
  double mean_loss;
  double counterpart_loss;
  double effect_size;
  double t;
  double df;
  double p;
  double alpha_spent;
} sl_slice_info;

SL_API size_t sl_result_count(const sl_result* result);
SL_API int sl_result_cache_only(const sl_result* result);
SL_API int sl_result_complete(const sl_result* result);
SL_API sl_status sl_result_get(const sl_result* result, size_t index, sl_slice_info* out);
/* One output record (single-line JSON) for slice `index`, ranked from 1. */
SL_API sl_status sl_result_record_json(const sl_result* result, size_t index, char** out);
SL_API sl_status sl_result_summary_json(const sl_result* result, char** out);
SL_API void sl_result_free(sl_result* result);

/* ---- evaluation harness ------------------------------------------------ */

/* experiment: "method-comparison", "sampling" or "fdr". params_json may be
 * NULL or "{}" for defaults. Writes a tab-separated table. */
SL_API sl_status sl_eval_run(const char* experiment, const char* params_json, char** out_table);

#ifdef __cplusplus
}
#endif

#endif /* SLICELENS_SLICELENS_H */
