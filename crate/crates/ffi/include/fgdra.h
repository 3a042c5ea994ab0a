#ifndef FGDRA_H
#define FGDRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FgdraStatus {
  FGDRA_STATUS_OK = 0,
  FGDRA_STATUS_NULL_POINTER = 1,
  FGDRA_STATUS_INVALID_ARGUMENT = 2,
  FGDRA_STATUS_CONFIG = 3,
  FGDRA_STATUS_IO = 4,
  FGDRA_STATUS_FORMAT = 5,
  FGDRA_STATUS_DIMENSION_MISMATCH = 6,
  FGDRA_STATUS_PANIC = 7,
} FgdraStatus;

typedef enum FgdraAlgorithm {
  FGDRA_ALGORITHM_FGDRA = 0,
  FGDRA_ALGORITHM_DRFA = 1,
  FGDRA_ALGORITHM_FED_AVG = 2,
} FgdraAlgorithm;

/**
 * Experiment configuration.
 */
typedef struct FgdraConfig FgdraConfig;

/**
 * Standardized train/test splits of every worker.
 */
typedef struct FgdraData FgdraData;

/**
 * MLP parameters.
 */
typedef struct FgdraModel FgdraModel;

/**
 * Test accuracies in percent.
 */
typedef struct FgdraAccuracy {
  double avg;
  double worst;
  double sd;
} FgdraAccuracy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next call into this library on the same thread.
 */
const char *fgdra_last_error(void);

/**
 * Number of MLP parameters.
 */
size_t fgdra_param_count(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FgdraStatus fgdra_config_new(struct FgdraConfig **out);

/**
 * Parses a config file.
 *
 * # Safety
 * `path` must be a valid C string and `out` valid for writes.
 */
enum FgdraStatus fgdra_config_load(const char *path, struct FgdraConfig **out);

/**
 * Sets one key and revalidates; on failure the config is unchanged.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be valid C strings.
 */
enum FgdraStatus fgdra_config_set(struct FgdraConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must come from this library or be null.
 */
void fgdra_config_free(struct FgdraConfig *config);

/**
 * Generates every worker's dataset from the config.
 *
 * # Safety
 * `config` must come from this library and `out` be valid for writes.
 */
enum FgdraStatus fgdra_data_generate(const struct FgdraConfig *config, struct FgdraData **out);

/**
 * Number of workers in `data`, or 0 for null.
 *
 * # Safety
 * `data` must come from this library or be null.
 */
size_t fgdra_data_workers(const struct FgdraData *data);

/**
 * # Safety
 * `data` must come from this library or be null.
 */
void fgdra_data_free(struct FgdraData *data);

/**
 * Trains one run of `algorithm` (an [`FgdraAlgorithm`] value) with `seed`
 * and returns the final model.
 *
 * # Safety
 * `config` and `data` must come from this library; `out` must be valid for writes.
 */
enum FgdraStatus fgdra_train(const struct FgdraConfig *config,
                             const struct FgdraData *data,
                             uint32_t algorithm,
                             uint64_t seed,
                             struct FgdraModel **out);

/**
 * Test accuracies of `model`. `per_worker` may be null; otherwise it must
 * hold `len` doubles, and `len` must equal the worker count.
 *
 * # Safety
 * Handles must come from this library; pointers must be valid as described.
 */
enum FgdraStatus fgdra_evaluate(const struct FgdraModel *model,
                                const struct FgdraData *data,
                                struct FgdraAccuracy *out,
                                double *per_worker,
                                size_t len);

/**
 * Classifies one standardized feature vector of `len` (= 400) doubles.
 * `probs` may be null; otherwise it receives the 4 class probabilities.
 *
 * # Safety
 * `model` must come from this library; pointers must be valid as described.
 */
enum FgdraStatus fgdra_model_predict(const struct FgdraModel *model,
                                     const double *features,
                                     size_t len,
                                     size_t *class_out,
                                     double *probs);

/**
 * Writes the model in the binary checkpoint format.
 *
 * # Safety
 * `model` must come from this library and `path` be a valid C string.
 */
enum FgdraStatus fgdra_model_save(const struct FgdraModel *model, const char *path);

/**
 * # Safety
 * `path` must be a valid C string and `out` valid for writes.
 */
enum FgdraStatus fgdra_model_load(const char *path, struct FgdraModel **out);

/**
 * Copies all parameters, in checkpoint order, into `buf` of `len` (= param count) doubles.
 *
 * # Safety
 * `model` must come from this library and `buf` hold `len` doubles.
 */
enum FgdraStatus fgdra_model_params(const struct FgdraModel *model, double *buf, size_t len);

/**
 * # Safety
 * `model` must come from this library or be null.
 */
void fgdra_model_free(struct FgdraModel *model);

/**
 * Convergence bound `(2 F0 + (17/2 + 8/m) σ² + 17 ν²) / √T`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FgdraStatus fgdra_theorem_bound(double sigma,
                                     double nu,
                                     double f0,
                                     size_t m,
                                     size_t t,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FGDRA_H */
