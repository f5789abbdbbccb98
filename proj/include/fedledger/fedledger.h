/*
 * Copyright 2026 The FedLedger Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the FedLedger simulator.
 *
 * Every call returns an fl_status. On failure the message is available from
 * fl_last_error() on the same thread until the next failing call. Strings
 * and byte buffers returned through out-parameters are owned by the caller
 * and released with fl_string_free / fl_bytes_free.
 */

#ifndef FEDLEDGER_FEDLEDGER_H_
#define FEDLEDGER_FEDLEDGER_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FL_API __declspec(dllexport)
#else
#define FL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fl_status {
  FL_OK = 0,
  FL_ERR_CONFIG = 1,
  FL_ERR_RUNTIME = 2,
  FL_ERR_LEDGER = 3,
  FL_ERR_INVALID_ARGUMENT = 4,
} fl_status;

FL_API const char* fl_version(void);
FL_API const char* fl_last_error(void);

FL_API void fl_string_free(char* s);
FL_API void fl_bytes_free(uint8_t* bytes);

/* Progress messages from long runs; pass NULL to silence. */
typedef void (*fl_log_fn)(const char* message, void* user_data);
FL_API void fl_set_log_callback(fl_log_fn fn, void* user_data);

/* ---- Parameter sets ---------------------------------------------------- */

typedef struct fl_params fl_params;

FL_API fl_status fl_params_create(fl_params** out);
FL_API void fl_params_free(fl_params* params);
FL_API fl_status fl_params_add(fl_params* params, const char* name,
                               const size_t* shape, size_t rank,
                               const double* values, size_t count);
/* Writes 64 lowercase hex characters and a terminating NUL. */
FL_API fl_status fl_params_digest(const fl_params* params, char out_hex[65]);
FL_API fl_status fl_params_canonical_bytes(const fl_params* params,
                                           uint8_t** out, size_t* out_len);

/* ---- Experiment configuration ------------------------------------------ */

typedef struct fl_config fl_config;

/* path may be NULL or empty for the built-in defaults. */
FL_API fl_status fl_config_load(const char* path, fl_config** out);
FL_API void fl_config_free(fl_config* config);
/* Applies a "dotted.key=value" override. */
FL_API fl_status fl_config_set(fl_config* config, const char* assignment);
FL_API fl_status fl_config_to_json(const fl_config* config, char** out_json);

/* ---- Experiments -------------------------------------------------------- */

typedef struct fl_result fl_result;

/* out_dir may be NULL or empty to keep everything in memory. */
FL_API fl_status fl_run_federated(const fl_config* config, const char* out_dir,
                                  fl_result** out);
FL_API fl_status fl_run_centralized(const fl_config* config, const char* out_dir,
                                    fl_result** out);
FL_API fl_status fl_run_local_only(const fl_config* config, const char* out_dir,
                                   fl_result** out);
FL_API fl_status fl_run_sweep(const fl_config* config, const char* out_dir,
                              fl_result** out);
FL_API void fl_result_free(fl_result* result);

FL_API fl_status fl_result_to_json(const fl_result* result, char** out_json);
/* Mean macro precision, recall and F1 as fractions. A sweep has no single
 * mean and returns FL_ERR_INVALID_ARGUMENT. */
FL_API fl_status fl_result_macro(const fl_result* result, double* precision,
                                 double* recall, double* f1);
/* Name of the written result document, "" when nothing was written. */
FL_API const char* fl_result_file(const fl_result* result);

/* ---- Data, ledger and tables ------------------------------------------- */

/* Writes the configured synthetic recording as CSV under out_dir and
 * returns the file path. */
FL_API fl_status fl_generate_data(const fl_config* config, const char* out_dir,
                                  char** out_path);

typedef struct fl_verify_report {
  int valid;
  size_t blocks;
  int64_t first_bad_index; /* -1 when valid */
  char reason[256];
} fl_verify_report;

/* FL_OK when the file could be read; the verdict is in the report. */
FL_API fl_status fl_verify_ledger(const char* path, fl_verify_report* report);

FL_API fl_status fl_render_table(const char* result_json_path, char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* FEDLEDGER_FEDLEDGER_H_ */
