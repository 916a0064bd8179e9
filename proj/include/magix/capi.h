#ifndef MAGIX_CAPI_H
#define MAGIX_CAPI_H

/* C interface to the dynamics-learning library. All functions return a
 * magix_status; on failure magix_last_error() describes what went wrong
 * (thread-local). Handles are opaque and owned by the caller through the
 * matching _free function. Configuration crosses the boundary as JSON text.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MAGIX_API __declspec(dllexport)
#else
#define MAGIX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum magix_status {
  MAGIX_OK = 0,
  MAGIX_ERR_USAGE = 1,      /* bad arguments, malformed config, missing files */
  MAGIX_ERR_NUMERIC = 2,    /* factorization or other numeric failure */
  MAGIX_ERR_DIVERGENCE = 3, /* objective or trajectory left the finite domain */
} magix_status;

typedef struct magix_dataset magix_dataset;
typedef struct magix_model magix_model;
typedef struct magix_report magix_report;

MAGIX_API const char* magix_last_error(void);
MAGIX_API const char* magix_status_name(magix_status s);

/* --- datasets ---------------------------------------------------------- */

/* spec_json: {"system","pattern","noise","base_seed","config":{...},...} */
MAGIX_API magix_status magix_simulate(const char* spec_json, uint64_t seed, magix_dataset** out);
MAGIX_API magix_status magix_dataset_load(const char* dir, magix_dataset** out);
MAGIX_API magix_status magix_dataset_save(const magix_dataset* ds, const char* dir);
MAGIX_API void magix_dataset_free(magix_dataset* ds);

MAGIX_API int magix_dataset_dim(const magix_dataset* ds);
MAGIX_API int magix_dataset_truth_points(const magix_dataset* ds);
MAGIX_API int magix_dataset_obs_count(const magix_dataset* ds, int component);

/* --- fitting ----------------------------------------------------------- */

MAGIX_API magix_status magix_fit(const magix_dataset* ds, const char* config_json, magix_model** out);
MAGIX_API magix_status magix_model_load(const char* path, magix_model** out);
MAGIX_API magix_status magix_model_save(const magix_model* m, const char* path);
/* continues iteration numbering and schedules from the stored count */
MAGIX_API magix_status magix_model_resume(magix_model* m, int extra_iterations);
MAGIX_API void magix_model_free(magix_model* m);

MAGIX_API int magix_model_iterations(const magix_model* m);
MAGIX_API int magix_model_trace_length(const magix_model* m);
MAGIX_API double magix_model_objective(const magix_model* m);
MAGIX_API magix_status magix_model_save_trace(const magix_model* m, const char* csv_path);

/* --- forecasting -------------------------------------------------------- */

/* Writes inferred.csv and reconstructed.csv under out_dir. The trajectory
 * spans the fitting grid plus horizon_points extra steps at the fitting
 * spacing. Divergence is flagged in the files, not an error. */
MAGIX_API magix_status magix_forecast(const magix_model* m, int horizon_points, const char* out_dir);

/* --- evaluation --------------------------------------------------------- */

/* Full replicate loop (simulate, fit, forecast, score) for spec_json. */
MAGIX_API magix_status magix_evaluate(const char* spec_json, int threads, magix_report** out);
/* report.json and replicates.csv are byte-stable per seed; wall-clock
 * measurements go to timings_csv_path. */
MAGIX_API magix_status magix_report_save(const magix_report* r, const char* json_path, const char* csv_path,
                                         const char* timings_csv_path);
MAGIX_API int magix_report_divergence_count(const magix_report* r);
MAGIX_API double magix_report_mean_rmse(const magix_report* r, const char* phase, const char* type,
                                        int component);
MAGIX_API void magix_report_free(magix_report* r);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MAGIX_CAPI_H */
