#ifndef TFINFER_TFINFER_H
#define TFINFER_TFINFER_H

/* C interface to the tfinfer library. Every function that can fail returns a
 * tfi_status; on failure tfi_last_error() describes the problem. The message
 * is per thread and stays valid until the next failing call on that thread.
 * Strings returned through char** are owned by the caller and released with
 * tfi_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TFI_API __declspec(dllexport)
#else
#define TFI_API __attribute__((visibility("default")))
#endif

typedef enum tfi_status {
  TFI_OK = 0,
  TFI_ERR_INVALID_ARGUMENT = 1,
  TFI_ERR_INVALID_SIZE = 2,
  TFI_ERR_DIMENSION = 3,
  TFI_ERR_SIZE_LIMIT = 4,
  TFI_ERR_DOMAIN = 5,
  TFI_ERR_PARSE = 6,
  TFI_ERR_IO = 7,
  TFI_ERR_CONVERGENCE = 8,
  TFI_ERR_NUMERICAL = 9,
  TFI_ERR_INSUFFICIENT_DATA = 10,
  TFI_ERR_INTERNAL = 11
} tfi_status;

TFI_API const char* tfi_version(void);
TFI_API const char* tfi_status_name(tfi_status status);
TFI_API const char* tfi_last_error(void);
TFI_API void tfi_string_free(char* s);

/* ---- disorder realizations ---- */

typedef struct tfi_instance tfi_instance;

TFI_API tfi_status tfi_instance_generate(int n_sites, double sigma, double gamma, uint64_t seed, tfi_instance** out);
TFI_API tfi_status tfi_instance_load(const char* path, tfi_instance** out);
TFI_API tfi_status tfi_instance_from_json(const char* text, tfi_instance** out);
TFI_API tfi_status tfi_instance_save(const tfi_instance* inst, const char* path);
TFI_API tfi_status tfi_instance_to_json(const tfi_instance* inst, char** out);
TFI_API void tfi_instance_free(tfi_instance* inst);

TFI_API int tfi_instance_n_sites(const tfi_instance* inst);
/* Each non-null array receives n_sites - 2 values. */
TFI_API tfi_status tfi_instance_couplings(const tfi_instance* inst, double* j3, double* j2, double* xi3, double* xi2);

/* ---- ground states; spins receive n_sites values of +1/-1 ---- */

/* Classical ground state of the clean (noisy = 0) or noisy couplings. */
TFI_API tfi_status tfi_classical_ground_state(const tfi_instance* inst, int noisy, int* spins, double* energy);

/* Exact ground state of the noisy couplings in a transverse field.
 * magnetizations receives <sigma^z_i>; flagged (optional) counts sites whose
 * sign was tie-broken. */
TFI_API tfi_status tfi_quantum_ground_state(const tfi_instance* inst, double field, double tol, int max_iter,
                                            double* energy, double* magnetizations, int* spins, int* flagged);

/* Matrix product state ground state with field annealing. options_json may be
 * NULL or an object with keys chi, max_sweeps, energy_tol, svd_cutoff,
 * anneal_start, anneal_steps, interpolation ("geometric" or "linear"), seed,
 * checkpoint. */
TFI_API tfi_status tfi_dmrg_ground_state(const tfi_instance* inst, double field, const char* options_json,
                                         double* energy, double* magnetizations, int* spins);

/* ---- disorder-averaged overlap sweeps ---- */

typedef struct tfi_curve tfi_curve;
typedef void (*tfi_progress_fn)(int item, int done, int total, void* user);

/* config_json: sweep configuration (see README). records_csv may be NULL. */
TFI_API tfi_status tfi_sweep_run(const char* config_json, const char* records_csv, int resume, int workers,
                                 tfi_progress_fn progress, void* user, tfi_curve** out);
/* Re-aggregates a per-realization CSV written by an earlier sweep. */
TFI_API tfi_status tfi_curve_from_records(const char* config_json, const char* records_csv, tfi_curve** out);
TFI_API void tfi_curve_free(tfi_curve* curve);

TFI_API int tfi_curve_size(const tfi_curve* curve);
TFI_API tfi_status tfi_curve_point(const tfi_curve* curve, int index, double* field, double* mean, double* stderr_mean,
                                   int* n, double* flagged_rate, int* failed);
TFI_API int tfi_curve_total_failed(const tfi_curve* curve);
TFI_API tfi_status tfi_curve_gamma_opt(const tfi_curve* curve, double* field, double* max_overlap, int* at_boundary);
TFI_API tfi_status tfi_curve_write_csv(const tfi_curve* curve, const char* path);
TFI_API tfi_status tfi_curve_metadata_json(const tfi_curve* curve, char** out);

/* ---- analysis ---- */

TFI_API tfi_status tfi_gamma_opt(const double* fields, const double* values, size_t n, double* field,
                                 double* max_overlap, int* at_boundary);
TFI_API tfi_status tfi_fit_power_law(const double* x, const double* y, size_t n, double* a, double* b,
                                     double* residual);

/* ---- mean-field theory ---- */

/* Solves both branches at one point. The result is {"request": resolved
 * request, "solution": order parameters, overlap factors, free energy and
 * diagnostics}. */
TFI_API tfi_status tfi_mf_solve(const char* request_json, char** result_json);

/* Field sweeps for one or more noise levels. Writes the per-point CSV to
 * csv_path (may be NULL). The summary is {"request": resolved request,
 * "rows": [{gamma_noise, gamma_opt, max_overlap, at_boundary, failed}]}. */
TFI_API tfi_status tfi_mf_sweep(const char* request_json, const char* csv_path, int workers, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
