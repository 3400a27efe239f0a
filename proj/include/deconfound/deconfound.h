/* Copyright 2026 The Deconfound Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libdeconfound.
 *
 * Handles are opaque and owned by the caller. Every function returning
 * dcf_status leaves a message for dcf_last_error() on failure; the message
 * is thread-local and valid until the next call on the same thread.
 *
 * Configuration is passed as a JSON document with the top-level sections
 * "dgp", "fit", "deconfound", "eval" and "output". Sections a call does not
 * use are still schema-checked. Strings returned through char** are
 * allocated by the library and released with dcf_string_free().
 */

#ifndef DECONFOUND_DECONFOUND_H_
#define DECONFOUND_DECONFOUND_H_

#include <stddef.h>

#if defined(DCF_BUILDING_LIBRARY)
#define DCF_API __attribute__((visibility("default")))
#else
#define DCF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcf_status {
  DCF_OK = 0,
  DCF_ERR_INTERNAL = 1,
  DCF_ERR_CONFIG = 2,
  DCF_ERR_IO = 3,
  DCF_ERR_NUMERICAL = 4
} dcf_status;

typedef struct dcf_dataset dcf_dataset;
typedef struct dcf_model dcf_model;

DCF_API const char* dcf_version(void);
DCF_API const char* dcf_last_error(void);
DCF_API void dcf_string_free(char* s);

/* 0 selects the hardware thread count. Results never depend on it. */
DCF_API dcf_status dcf_set_threads(int threads);

/* The configuration document with every default filled in. */
DCF_API dcf_status dcf_default_config(char** out_json);

/* ---- datasets ---- */

/* Requires a "dgp" section. */
DCF_API dcf_status dcf_simulate(const char* config_json, dcf_dataset** out);
/* pairs_path may be NULL. */
DCF_API dcf_status dcf_dataset_read(const char* items_path,
                                    const char* pairs_path, dcf_dataset** out);
DCF_API dcf_status dcf_dataset_from_jsonl(const char* items_text,
                                          const char* pairs_text,
                                          dcf_dataset** out);
DCF_API dcf_status dcf_dataset_write(const dcf_dataset* ds,
                                     const char* items_path,
                                     const char* pairs_path);
DCF_API dcf_status dcf_dataset_to_jsonl(const dcf_dataset* ds,
                                        char** items_text, char** pairs_text);
/* format is "csv" or "jsonl"; mapping_json is a column mapping object. */
DCF_API dcf_status dcf_dataset_ingest(const char* path, const char* format,
                                      const char* mapping_json,
                                      dcf_dataset** out);
/* JSON array of violation strings; empty when the dataset is valid. */
DCF_API dcf_status dcf_dataset_validate(const dcf_dataset* ds,
                                        char** out_json);
DCF_API size_t dcf_dataset_item_count(const dcf_dataset* ds);
DCF_API size_t dcf_dataset_pair_count(const dcf_dataset* ds);
DCF_API void dcf_dataset_free(dcf_dataset* ds);

/* ---- reward models ---- */

/* head is "regression" (ridge on train outcomes) or "pairwise" (BT on
 * train pairs). Options come from the "fit" section. */
DCF_API dcf_status dcf_fit(const dcf_dataset* ds, const char* config_json,
                           const char* head, dcf_model** out);
DCF_API dcf_status dcf_model_to_json(const dcf_model* model, char** out_json);
DCF_API dcf_status dcf_model_from_json(const char* json, dcf_model** out);
/* Scores every item of ds, in file order, into scores[0..n). */
DCF_API dcf_status dcf_model_predict(const dcf_model* model,
                                     const dcf_dataset* ds, double* scores,
                                     size_t n);
DCF_API void dcf_model_free(dcf_model* model);

/* ---- confounder estimation ---- */

/* Uses the "deconfound" section (and "fit" for the DML nuisances). */
DCF_API dcf_status dcf_deconfound(const dcf_dataset* ds,
                                  const char* config_json, char** fit_json);
DCF_API dcf_status dcf_residualize(const dcf_dataset* ds, const char* fit_json,
                                   dcf_dataset** out);

/* ---- reports ---- */

/* Per-split diagnostics of a model on a dataset. */
DCF_API dcf_status dcf_evaluate(const dcf_model* model, const dcf_dataset* ds,
                                const char* config_json, char** report_json);
/* Ridge over the "eval.grid" lambdas. Any of the outputs may be NULL. */
DCF_API dcf_status dcf_sweep(const dcf_dataset* ds, const char* config_json,
                             char** report_json, char** report_csv,
                             char** plot_csv);
/* Reward-arm comparison over "eval.seeds"; the dgp seed is replaced by each
 * of them in turn. */
DCF_API dcf_status dcf_scenario(const char* config_json, char** report_json,
                                char** report_csv);
/* Weekday-marker study at "dgp.skew" over "eval.seeds". */
DCF_API dcf_status dcf_weekday_study(const char* config_json,
                                     char** report_json, char** report_csv);

#ifdef __cplusplus
}
#endif

#endif /* DECONFOUND_DECONFOUND_H_ */
