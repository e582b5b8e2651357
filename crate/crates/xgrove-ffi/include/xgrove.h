/* C ABI for the xgrove ensemble-tree explainability toolkit. */

#ifndef XGROVE_H
#define XGROVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes of every fallible call.
 */
typedef enum XgStatus {
  XG_STATUS_OK = 0,
  /**
   * A null handle or output pointer was passed.
   */
  XG_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument (bad arity, out-of-range value, unknown name).
   */
  XG_STATUS_ARGUMENT = 2,
  /**
   * Malformed cell or JSON while parsing input.
   */
  XG_STATUS_PARSE = 3,
  /**
   * Header/schema mismatch in a dataset.
   */
  XG_STATUS_SCHEMA = 4,
  /**
   * Filesystem failure.
   */
  XG_STATUS_IO = 5,
  /**
   * Operation not supported for this model kind.
   */
  XG_STATUS_UNSUPPORTED = 6,
  /**
   * A panic was caught at the FFI boundary.
   */
  XG_STATUS_PANIC = 7,
} XgStatus;

/**
 * Opaque dataset handle.
 */
typedef struct XgDataset XgDataset;

/**
 * Opaque fitted-pipeline handle (preprocessing + selection + classifier).
 */
typedef struct XgModel XgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *xg_version(void);

/**
 * Message of the last failing call on this thread (empty when none).
 * Valid until the next failing call on the same thread.
 */
const char *xg_last_error(void);

/**
 * Release a string returned by a `_json` function. Accepts null.
 *
 * # Safety
 * `ptr` must have been returned by this library and not freed before.
 */
void xg_string_free(char *ptr);

/**
 * Load a CSV dataset (canonical heart-failure schema, or inferred when
 * the header differs).
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum XgStatus xg_dataset_load_csv(const char *path, struct XgDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle; `out` must be valid.
 */
enum XgStatus xg_dataset_rows(const struct XgDataset *ds, uintptr_t *out);

/**
 * Number of input features (target excluded).
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` must be valid.
 */
enum XgStatus xg_dataset_inputs(const struct XgDataset *ds, uintptr_t *out);

/**
 * # Safety
 * `ds` must be null or an unreleased handle from this library.
 */
void xg_dataset_free(struct XgDataset *ds);

/**
 * Execute the full pipeline: `config_text` uses the documented
 * `key = value` format (may be empty), `data_path` points at the CSV and
 * `out_dir` receives the report artifacts (including `model.json`).
 *
 * # Safety
 * All three strings must be NUL-terminated.
 */
enum XgStatus xg_run(const char *config_text, const char *data_path, const char *out_dir);

/**
 * Load a pipeline model saved by a run (`model.json`).
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
enum XgStatus xg_model_load(const char *path, struct XgModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` must be NUL-terminated.
 */
enum XgStatus xg_model_save(const struct XgModel *model, const char *path);

/**
 * Raw input arity of the model: the dataset's column count minus the
 * target. Inputs are passed in dataset column order with the target
 * omitted; NaN marks a missing value.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
enum XgStatus xg_model_raw_inputs(const struct XgModel *model, uintptr_t *out);

/**
 * Number of features the fitted classifier actually uses.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
enum XgStatus xg_model_n_features(const struct XgModel *model, uintptr_t *out);

/**
 * Selected feature names as a JSON array; release with `xg_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
enum XgStatus xg_model_feature_names_json(const struct XgModel *model, char **out);

/**
 * P(class 1) for one raw input row (dataset column order, target
 * omitted).
 *
 * # Safety
 * `inputs` must point at `len` doubles; `out_p1` must be valid.
 */
enum XgStatus xg_model_predict(const struct XgModel *model,
                               const double *inputs,
                               uintptr_t len,
                               double *out_p1);

/**
 * Exact Shapley values of P(class 1) for one raw input row against a
 * dataset used as the background (capped at its first 100 rows).
 * `out_values` receives one value per model feature (see
 * `xg_model_n_features`); `out_base` receives the base value.
 *
 * # Safety
 * Buffers must match the documented lengths.
 */
enum XgStatus xg_model_shap(const struct XgModel *model,
                            const struct XgDataset *background,
                            const double *inputs,
                            uintptr_t len,
                            double *out_values,
                            uintptr_t values_len,
                            double *out_base);

/**
 * # Safety
 * `model` must be null or an unreleased handle from this library.
 */
void xg_model_free(struct XgModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XGROVE_H */
