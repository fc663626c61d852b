/*
 * mlada: metric-learning-assisted domain adaptation, C interface.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Every fallible call returns an mlada_status; on failure a one-line cause is
 * available from mlada_last_error() on the calling thread until the next
 * failing call. Status values double as the CLI exit codes.
 */
#ifndef MLADA_MLADA_H
#define MLADA_MLADA_H

#include <stddef.h>
#include <stdint.h>

#if defined(MLADA_BUILDING_LIBRARY)
#define MLADA_API __attribute__((visibility("default")))
#else
#define MLADA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mlada_status {
  MLADA_OK = 0,
  MLADA_ERR_INTERNAL = 1,
  MLADA_ERR_USAGE = 2,   /* bad arguments, unknown keys, shape mismatches */
  MLADA_ERR_DATA = 3,    /* malformed CSV or parameter files */
  MLADA_ERR_NUMERIC = 4, /* non-finite values during training or evaluation */
  MLADA_ERR_IO = 5       /* unreadable or unwritable paths */
} mlada_status;

typedef struct mlada_config mlada_config;
typedef struct mlada_dataset mlada_dataset;
typedef struct mlada_model mlada_model;
typedef struct mlada_metrics mlada_metrics;
typedef struct mlada_grid_result mlada_grid_result;

MLADA_API const char* mlada_version(void);
MLADA_API const char* mlada_last_error(void);

/* ---- configuration ---------------------------------------------------- */

MLADA_API mlada_status mlada_config_create(mlada_config** out);
MLADA_API void mlada_config_destroy(mlada_config* cfg);
/* Flat "key = value" file, or a manifest.json from an earlier run. */
MLADA_API mlada_status mlada_config_load_file(mlada_config* cfg, const char* path);
MLADA_API mlada_status mlada_config_set(mlada_config* cfg, const char* key, const char* value);
/* Copies the value's text into buf (NUL-terminated). *needed receives the
   size including the terminator; a short buffer yields MLADA_ERR_USAGE. */
MLADA_API mlada_status mlada_config_get(const mlada_config* cfg, const char* key, char* buf,
                                        size_t buf_len, size_t* needed);
MLADA_API mlada_status mlada_config_validate(const mlada_config* cfg);
MLADA_API mlada_status mlada_config_write_manifest(const mlada_config* cfg, const char* command,
                                                   const char* path);

/* ---- data ------------------------------------------------------------- */

/* Source and target as the configuration describes them (generated blobs or
   a CSV pair, optionally downsampled). The target keeps its labels for
   scoring only. */
MLADA_API mlada_status mlada_data_load(const mlada_config* cfg, mlada_dataset** source,
                                       mlada_dataset** target);
MLADA_API mlada_status mlada_dataset_load_csv(const char* path, int labeled, int skip_header,
                                              mlada_dataset** out);
MLADA_API mlada_status mlada_dataset_save_csv(const mlada_dataset* ds, const char* path);
MLADA_API mlada_status mlada_dataset_downsample(const mlada_dataset* ds, size_t divisor,
                                                uint64_t seed, mlada_dataset** out);
MLADA_API mlada_status mlada_dataset_info(const mlada_dataset* ds, size_t* rows, size_t* cols,
                                          size_t* classes, int* labeled);
MLADA_API void mlada_dataset_destroy(mlada_dataset* ds);

/* ---- training --------------------------------------------------------- */

MLADA_API mlada_status mlada_fit(const mlada_config* cfg, const mlada_dataset* source,
                                 const mlada_dataset* target, mlada_model** model,
                                 mlada_metrics** metrics);
MLADA_API mlada_status mlada_metrics_counts(const mlada_metrics* metrics, size_t* steps,
                                            size_t* evals);
/* iter,l_class,l_domain,l_triplet,l_entropy,total */
MLADA_API mlada_status mlada_metrics_write_losses_csv(const mlada_metrics* metrics, const char* path);
/* iter,source_acc,target_acc */
MLADA_API mlada_status mlada_metrics_write_evals_csv(const mlada_metrics* metrics, const char* path);
MLADA_API void mlada_metrics_destroy(mlada_metrics* metrics);

/* ---- models ----------------------------------------------------------- */

MLADA_API mlada_status mlada_model_save(const mlada_model* model, const char* path);
MLADA_API mlada_status mlada_model_load(const char* path, mlada_model** out);
MLADA_API void mlada_model_destroy(mlada_model* model);
MLADA_API mlada_status mlada_evaluate_accuracy(const mlada_model* model, const mlada_dataset* ds,
                                               double* accuracy);

/* ---- robustness ------------------------------------------------------- */

/* One accuracy per intensity; noise is generated batch-wise from seed. */
MLADA_API mlada_status mlada_evaluate_noisy(const mlada_model* model, const mlada_dataset* target,
                                            const double* intensities, size_t count, uint64_t seed,
                                            size_t batch_size, double* accuracies);
/* evaluate_noisy with the configured intensities, batch size and noise seed
   (seed + 4); writes intensity,accuracy rows to csv_path. */
MLADA_API mlada_status mlada_perturb(const mlada_model* model, const mlada_dataset* target,
                                     const mlada_config* cfg, const char* csv_path);

/* ---- analysis --------------------------------------------------------- */

/* Critical-pair report for the most uncertain target sample (JSON and text)
   and the embedding CSV. Pair space and grouping come from the config. */
MLADA_API mlada_status mlada_analyze(const mlada_model* model, const mlada_dataset* target,
                                     const mlada_config* cfg, const char* report_json_path,
                                     const char* report_text_path, const char* embeddings_path);

/* ---- experiment grids ------------------------------------------------- */

/* Each setting is trained cfg.repeats times; repeat r uses seed + 100 r and
   its own generated data. A run that produces non-finite values is recorded
   as diverged rather than failing the grid. */
typedef enum mlada_grid {
  MLADA_GRID_ABLATION = 0, /* six loss combinations */
  MLADA_GRID_MARGINS = 1   /* constant margins vs dynamic margin */
} mlada_grid;

MLADA_API mlada_status mlada_run_grid(const mlada_config* cfg, mlada_grid grid,
                                      mlada_grid_result** out);
MLADA_API size_t mlada_grid_size(const mlada_grid_result* result);
/* *name stays valid while result lives. Medians cover the repeats that
   converged (NaN when none did); *diverged counts the others. Any output
   pointer may be NULL. */
MLADA_API mlada_status mlada_grid_row(const mlada_grid_result* result, size_t index,
                                      const char** name, double* median_source_acc,
                                      double* median_target_acc, size_t* diverged);
MLADA_API mlada_status mlada_grid_write(const mlada_grid_result* result, const char* grid_csv_path,
                                        const char* summary_csv_path);
MLADA_API const char* mlada_grid_table(const mlada_grid_result* result);
MLADA_API void mlada_grid_destroy(mlada_grid_result* result);

#ifdef __cplusplus
}
#endif

#endif /* MLADA_MLADA_H */
