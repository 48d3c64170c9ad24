#ifndef SMPX_H
#define SMPX_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum SmpxStatus {
  SMPX_STATUS_OK = 0,
  SMPX_STATUS_NULL_POINTER = 1,
  SMPX_STATUS_CONFIG = 2,
  SMPX_STATUS_NUMERICAL = 3,
  SMPX_STATUS_INPUT = 4,
  SMPX_STATUS_DOMAIN = 5,
  SMPX_STATUS_IO = 6,
  SMPX_STATUS_INVALID_UTF8 = 7,
  SMPX_STATUS_PANIC = 8,
} SmpxStatus;

/**
 * A validated experiment configuration.
 */
typedef struct SmpxExperiment SmpxExperiment;

/**
 * The outcome of running an experiment.
 */
typedef struct SmpxResult SmpxResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *smpx_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *smpx_version(void);

/**
 * Parses a TOML or JSON experiment configuration.
 */
enum SmpxStatus smpx_experiment_new(const char *config, struct SmpxExperiment **out);

void smpx_experiment_free(struct SmpxExperiment *exp);

/**
 * Runs an experiment; output files named in the configuration are written.
 */
enum SmpxStatus smpx_experiment_run(const struct SmpxExperiment *exp, struct SmpxResult **out);

void smpx_result_free(struct SmpxResult *res);

/**
 * Mean `Err_N` at the final checkpoint and the stepsize used.
 */
enum SmpxStatus smpx_result_final(const struct SmpxResult *res, double *err_nash, double *gamma);

/**
 * Per-run CSV rows as a newly allocated string.
 */
char *smpx_result_csv(const struct SmpxResult *res);

/**
 * JSON sidecar (configuration, constants, bounds, summary) as a newly allocated string.
 */
char *smpx_result_sidecar_json(const struct SmpxResult *res);

void smpx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMPX_H */
