// Copyright 2026 The MbSC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the shared-control toolkit.
 *
 * Every handle is opaque and owned by the caller; release it with the
 * matching *_destroy function (NULL is accepted). Functions return
 * MBSC_OK or an error status; mbsc_last_error() then describes the failure
 * on the calling thread. Output strings use the two-call pattern: pass a
 * buffer and capacity, receive the required size (including the NUL) in
 * *needed; the copy is truncated when the capacity is too small.
 *
 * States are double[6] = {x, y, theta, vx, vy, omega}; controls are
 * double[2] = {main throttle, rotational throttle}. */

#ifndef MBSC_MBSC_H
#define MBSC_MBSC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MBSC_API __declspec(dllexport)
#else
#define MBSC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mbsc_status {
  MBSC_OK = 0,
  MBSC_E_INVALID_ARGUMENT = 1,
  MBSC_E_CONFIG = 2,
  MBSC_E_MODEL = 3,
  MBSC_E_NOT_FITTED = 4,
  MBSC_E_NON_FINITE = 5,
  MBSC_E_SOLVER = 6,
  MBSC_E_IO = 7,
  MBSC_E_RUNTIME = 8
} mbsc_status;

typedef struct mbsc_study mbsc_study;
typedef struct mbsc_model mbsc_model;
typedef struct mbsc_controller mbsc_controller;
typedef struct mbsc_server mbsc_server;

MBSC_API const char* mbsc_version(void);
MBSC_API const char* mbsc_status_string(mbsc_status status);
/* Message for the last failing call on this thread; "" when none. */
MBSC_API const char* mbsc_last_error(void);

/* ---- study configuration (key = value text, see README) ---- */
MBSC_API mbsc_status mbsc_study_create(mbsc_study** out);
MBSC_API mbsc_status mbsc_study_parse(const char* text, mbsc_study** out);
MBSC_API mbsc_status mbsc_study_load(const char* path, mbsc_study** out);
/* Sets one key and re-validates the whole configuration. */
MBSC_API mbsc_status mbsc_study_set(mbsc_study* study, const char* key, const char* value);
MBSC_API mbsc_status mbsc_study_serialize(const mbsc_study* study, char* buffer, size_t capacity,
                                          size_t* needed);
MBSC_API void mbsc_study_destroy(mbsc_study* study);

/* ---- experiment verbs ---- */
/* Runs `trials` user-only trials with the named pilot ("expert"|"novice")
 * and writes them as a line-delimited log. `pairs` receives the number of
 * snapshot pairs the log yields (may be NULL). */
MBSC_API mbsc_status mbsc_collect(const mbsc_study* study, const char* pilot, int trials,
                                  uint64_t seed, const char* log_path, size_t* pairs);
/* Fits a model on every trial in the given logs. basis: "linear"|"nonlinear". */
MBSC_API mbsc_status mbsc_fit_logs(const char* const* log_paths, size_t count, const char* basis,
                                   double epsilon, mbsc_model** out);
/* Runs the configured study and writes the output bundle to the study's
 * output_dir. */
MBSC_API mbsc_status mbsc_run_study(const mbsc_study* study);
/* Recomputes report.json (and tables/heatmaps) from a study directory's raw
 * logs and copies the JSON text out. */
MBSC_API mbsc_status mbsc_report(const char* study_dir, char* buffer, size_t capacity,
                                 size_t* needed);

/* ---- models ---- */
MBSC_API mbsc_status mbsc_model_load(const char* path, mbsc_model** out);
MBSC_API mbsc_status mbsc_model_save(const mbsc_model* model, const char* path);
MBSC_API mbsc_status mbsc_model_info(const mbsc_model* model, int* dim, int* linear_basis,
                                     int64_t* samples);
MBSC_API mbsc_status mbsc_model_predict(const mbsc_model* model, const double state[6],
                                        const double control[2], double next[6]);
MBSC_API void mbsc_model_destroy(mbsc_model* model);

/* ---- simulator and filter ---- */
MBSC_API mbsc_status mbsc_sim_step(const mbsc_study* study, const double state[6],
                                   const double control[2], double next[6], int* clamped);
/* Maxwell's demon filter; per_axis != 0 filters each channel separately. */
MBSC_API mbsc_status mbsc_mda_filter(const double u_h[2], const double u_a[2], int per_axis,
                                     double u_out[2], int* admitted);

/* ---- autonomy ---- */
MBSC_API mbsc_status mbsc_controller_create(const mbsc_model* model, const mbsc_study* study,
                                            mbsc_controller** out);
MBSC_API mbsc_status mbsc_controller_command(mbsc_controller* controller, const double state[6],
                                             double control[2]);
MBSC_API void mbsc_controller_destroy(mbsc_controller* controller);

/* ---- live bridge ---- */
/* Builds the study's models and starts listening. port 0 picks a free port,
 * reported through bound_port. log_dir may be NULL (no session logs). */
MBSC_API mbsc_status mbsc_server_start(const mbsc_study* study, const char* host, int port,
                                       int tick_ms, const char* log_dir, mbsc_server** out,
                                       int* bound_port);
MBSC_API void mbsc_server_stop(mbsc_server* server);
MBSC_API void mbsc_server_destroy(mbsc_server* server);

#ifdef __cplusplus
}
#endif

#endif /* MBSC_MBSC_H */
