/* Copyright 2026 The topicrefine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

	http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef TOPICREFINE_TOPICREFINE_H
#define TOPICREFINE_TOPICREFINE_H

#include <stddef.h>

#if defined(TOPICREFINE_BUILDING_LIBRARY)
#define TR_API __attribute__((visibility("default")))
#else
#define TR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tr_status {
  TR_OK = 0,
  TR_ERR_INTERNAL = 1,
  TR_ERR_CONFIG = 2,
  TR_ERR_BACKEND = 3,
  TR_ERR_NUMERIC = 4,
  TR_ERR_STALE = 5,
  TR_ERR_DATA = 6
} tr_status;

typedef struct tr_pipeline tr_pipeline;

TR_API const char* tr_version(void);

/* Message of the last failed call on this thread; "" after a success. */
TR_API const char* tr_last_error(void);

TR_API tr_status tr_pipeline_open(const char* config_path, tr_pipeline** out);
TR_API void tr_pipeline_close(tr_pipeline* p);

/* Keys: seed, k, backend, output, ablation, force, replications, deltas.
   Options must be set before the first run call. */
TR_API tr_status tr_pipeline_set_option(tr_pipeline* p, const char* key, const char* value);

TR_API tr_status tr_pipeline_run(tr_pipeline* p);
TR_API tr_status tr_pipeline_stage(tr_pipeline* p, const char* name);

/* Copy a NUL-terminated string into buf and return the length it needs,
   excluding the terminator. Passing cap 0 only queries the length. */
TR_API size_t tr_pipeline_run_dir(tr_pipeline* p, char* buf, size_t cap);
TR_API size_t tr_pipeline_summary(tr_pipeline* p, char* buf, size_t cap);

/* Minimum-cost assignment on a row-major rows x cols matrix. out_rows and
   out_cols receive min(rows, cols) entries each. */
TR_API tr_status tr_hungarian(const double* cost, size_t rows, size_t cols, size_t* out_rows,
                              size_t* out_cols, double* out_total);

#ifdef __cplusplus
}
#endif

#endif
