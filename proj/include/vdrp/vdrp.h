/* Copyright 2026 The VDRP Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the VDRP library. Every fallible call returns a vdrp_status;
 * on failure vdrp_last_error() describes the problem for the calling thread.
 * Handles are opaque and must be released with their matching _free call.
 * Strings returned through char** out-parameters are freed with
 * vdrp_string_free. */
#ifndef VDRP_VDRP_H_
#define VDRP_VDRP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(VDRP_BUILDING_LIBRARY)
#define VDRP_API __declspec(dllexport)
#else
#define VDRP_API __declspec(dllimport)
#endif
#else
#define VDRP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vdrp_status {
  VDRP_OK = 0,
  VDRP_ERR_DIMENSION = 1,
  VDRP_ERR_PARAMETER = 2,
  VDRP_ERR_NUMERIC = 3,
  VDRP_ERR_IO = 4,
  VDRP_ERR_VALIDATION = 5,
  VDRP_ERR_NULL_ARGUMENT = 6,
  VDRP_ERR_INTERNAL = 7
} vdrp_status;

typedef struct vdrp_tensor vdrp_tensor;
typedef struct vdrp_config vdrp_config;

typedef void (*vdrp_warning_fn)(const char* message, void* user_data);

/* Library metadata and diagnostics. */
VDRP_API const char* vdrp_version(void);
VDRP_API const char* vdrp_status_name(vdrp_status status);
/* Message of the most recent failure on this thread; "" if none. */
VDRP_API const char* vdrp_last_error(void);
/* NULL restores the default handler, which writes to stderr. */
VDRP_API void vdrp_set_warning_handler(vdrp_warning_fn fn, void* user_data);
VDRP_API void vdrp_string_free(char* s);

/* Dense row-major tensors of doubles. `data` may be NULL for zeros. */
VDRP_API vdrp_status vdrp_tensor_create(const size_t* shape, size_t rank, const double* data,
                                        vdrp_tensor** out);
VDRP_API void vdrp_tensor_free(vdrp_tensor* t);
VDRP_API size_t vdrp_tensor_rank(const vdrp_tensor* t);
VDRP_API size_t vdrp_tensor_dim(const vdrp_tensor* t, size_t axis);
VDRP_API size_t vdrp_tensor_size(const vdrp_tensor* t);
VDRP_API const double* vdrp_tensor_data(const vdrp_tensor* t);
/* VDT1 files store f32; reading widens to double. */
VDRP_API vdrp_status vdrp_tensor_read(const char* path, vdrp_tensor** out);
VDRP_API vdrp_status vdrp_tensor_write(const vdrp_tensor* t, const char* path);

/* Concept weighting. `out` receives k weights. */
VDRP_API vdrp_status vdrp_sparsemax(const double* scores, size_t k, double* out);
VDRP_API vdrp_status vdrp_tau_sparsemax(const double* scores, size_t k, double tau_cut, double* out);
/* mode: "sparsemax", "tau_sparsemax" (param = tau_cut), "softmax"
 * (param = temperature) or "top_k" (param = number kept). */
VDRP_API vdrp_status vdrp_retrieve_weights(const double* scores, size_t k, const char* mode, double param,
                                           double* out);

/* Metrics. Boxes are {x1, y1, x2, y2}. */
VDRP_API vdrp_status vdrp_iou(const double* box_a, const double* box_b, double* out);
VDRP_API vdrp_status vdrp_harmonic_mean(double seen, double unseen, double* out);

/* Run configuration: flat dotted keys with typed defaults. */
VDRP_API vdrp_status vdrp_config_create(vdrp_config** out);
VDRP_API void vdrp_config_free(vdrp_config* cfg);
VDRP_API vdrp_status vdrp_config_load(vdrp_config* cfg, const char* path);
VDRP_API vdrp_status vdrp_config_set(vdrp_config* cfg, const char* key, const char* value);
VDRP_API vdrp_status vdrp_config_set_seed(vdrp_config* cfg, uint64_t seed);
VDRP_API vdrp_status vdrp_config_get(const vdrp_config* cfg, const char* key, char** out_json);
VDRP_API vdrp_status vdrp_config_to_json(const vdrp_config* cfg, char** out_json);

/* Pipeline commands. */
VDRP_API size_t vdrp_command_count(void);
VDRP_API const char* vdrp_command_name(size_t index);
/* Runs `command`, writing its outputs and manifest.json into out_dir. A short
 * summary is returned through `summary` when it is non-NULL. */
VDRP_API vdrp_status vdrp_run_command(const char* command, const vdrp_config* cfg, const char* out_dir,
                                      char** summary);

#ifdef __cplusplus
}
#endif

#endif /* VDRP_VDRP_H_ */
