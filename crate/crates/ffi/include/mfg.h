#ifndef MFG_H
#define MFG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum MfgStatus {
  MFG_STATUS_OK = 0,
  MFG_STATUS_NULL_POINTER = 1,
  MFG_STATUS_INVALID_UTF8 = 2,
  MFG_STATUS_PARSE_ERROR = 3,
  MFG_STATUS_VALIDATION_ERROR = 4,
  MFG_STATUS_IO_ERROR = 5,
  MFG_STATUS_INVALID_ARGUMENT = 6,
  MFG_STATUS_NUMERICAL_ERROR = 7,
  MFG_STATUS_OUT_OF_RANGE = 8,
  MFG_STATUS_PANIC = 9,
} MfgStatus;

/**
 * Resolved run configuration.
 */
typedef struct MfgConfig MfgConfig;

/**
 * Finished run with all artifacts.
 */
typedef struct MfgRun MfgRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfg_version(void);

/**
 * Message of the last failing call on this thread, or null. The pointer is
 * valid until the next failing call on this thread.
 */
const char *mfg_last_error_message(void);

/**
 * Parses the config file at `path`.
 */
enum MfgStatus mfg_config_from_file(const char *path, struct MfgConfig **out);

/**
 * Parses config text.
 */
enum MfgStatus mfg_config_from_str(const char *text, struct MfgConfig **out);

enum MfgStatus mfg_config_set_seed(struct MfgConfig *config, uint64_t seed);

/**
 * Threads for the parallel diagnostics; 0 lets the library decide.
 */
enum MfgStatus mfg_config_set_workers(struct MfgConfig *config, size_t workers);

void mfg_config_free(struct MfgConfig *config);

/**
 * Solves the configuration. A run that did not converge still succeeds;
 * query it with [`mfg_run_converged`].
 */
enum MfgStatus mfg_run(const struct MfgConfig *config, struct MfgRun **out);

enum MfgStatus mfg_run_converged(const struct MfgRun *run, bool *out);

/**
 * Whether the equilibrium verification of the run passed.
 */
enum MfgStatus mfg_run_verified(const struct MfgRun *run, bool *out);

/**
 * Number of sweeps of the main run.
 */
enum MfgStatus mfg_run_sweeps(const struct MfgRun *run, size_t *out);

/**
 * Modification count of sweep `sweep` (1-based) of the main run.
 */
enum MfgStatus mfg_run_modifications(const struct MfgRun *run, size_t sweep, size_t *out);

/**
 * Number of time steps; mass values exist for indices `0..=n_steps`.
 */
enum MfgStatus mfg_run_n_steps(const struct MfgRun *run, size_t *out);

/**
 * Total mass in the domain at time index `step`.
 */
enum MfgStatus mfg_run_mass(const struct MfgRun *run, size_t step, double *out);

/**
 * Writes the run's artifacts into directory `dir`.
 */
enum MfgStatus mfg_run_write_outputs(const struct MfgRun *run, const char *dir);

void mfg_run_free(struct MfgRun *run);

/**
 * Principal branch of the Lambert W function.
 */
enum MfgStatus mfg_lambert_w0(double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFG_H */
