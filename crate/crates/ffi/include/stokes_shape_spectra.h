#ifndef STOKES_SHAPE_SPECTRA_H
#define STOKES_SHAPE_SPECTRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum SssStatus {
  SSS_STATUS_OK = 0,
  SSS_STATUS_NULL_POINTER = 1,
  SSS_STATUS_INVALID_ARGUMENT = 2,
  SSS_STATUS_CONFIG = 3,
  SSS_STATUS_SOLVER = 4,
  SSS_STATUS_PANIC = 5,
} SssStatus;

// Parsed run configuration.
typedef struct SssConfig SssConfig;

// Discretized single-layer operator at a fixed δ.
typedef struct SssDiscretization SssDiscretization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length including the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t sss_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sss_version(void);

// Parses a TOML configuration document.
//
// # Safety
// `source` must be a NUL-terminated string; `out` must be writable.
enum SssStatus sss_config_parse(const char *source, struct SssConfig **out);

// Releases a configuration handle. Null is ignored.
//
// # Safety
// `cfg` must come from [`sss_config_parse`] and not be used afterwards.
void sss_config_free(struct SssConfig *cfg);

// Builds the discretization of the configured surface at perturbation amplitude `delta`.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum SssStatus sss_discretization_new(const struct SssConfig *cfg,
                                      double delta,
                                      struct SssDiscretization **out);

// Releases a discretization handle. Null is ignored.
//
// # Safety
// `disc` must come from [`sss_discretization_new`] and not be used afterwards.
void sss_discretization_free(struct SssDiscretization *disc);

// Number of unknowns of the discrete operator.
//
// # Safety
// `disc` must be a live handle; `out` must be writable.
enum SssStatus sss_discretization_dim(const struct SssDiscretization *disc, size_t *out);

// Smallest singular value of the operator at real `lambda`.
//
// # Safety
// `disc` must be a live handle; `out` must be writable.
enum SssStatus sss_sigma_min(const struct SssDiscretization *disc, double lambda, double *out);

// Locates the eigenvalue inside `[lo, hi]` and its multiplicity.
//
// # Safety
// `disc` must be a live handle; `lambda` and `multiplicity` must be writable.
enum SssStatus sss_find_eigen(const struct SssDiscretization *disc,
                              double lo,
                              double hi,
                              double *lambda,
                              size_t *multiplicity);

// `s`-th positive zero of the spherical Bessel function `j_n`.
//
// # Safety
// `out` must be writable.
enum SssStatus sss_bessel_zero(size_t n, size_t s, double *out);

// Runs a pipeline stage (`validate-kernels`, `scan`, `solve`, `perturb`,
// `full`) and stores the CLI exit code in `exit_code`.
//
// # Safety
// `cfg` must be a live handle, `stage` a NUL-terminated string, `out_dir`
// null or NUL-terminated, and `exit_code` writable.
enum SssStatus sss_run_stage(const struct SssConfig *cfg,
                             const char *stage,
                             const char *out_dir,
                             int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOKES_SHAPE_SPECTRA_H */
