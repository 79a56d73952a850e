#ifndef EEM_H
#define EEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define EEM_ALGO_EEM 0

#define EEM_ALGO_EEKM 1

#define EEM_ALGO_WELM 2

#define EEM_ACT_SIG 0

#define EEM_ACT_NSIG 1

#define EEM_ACT_RBF 2

/**
 * Result codes returned by every fallible function.
 */
typedef enum EemStatus {
  EEM_STATUS_OK = 0,
  EEM_STATUS_NULL_POINTER = 1,
  EEM_STATUS_INVALID_ARGUMENT = 2,
  EEM_STATUS_MISSING_CLASS = 3,
  EEM_STATUS_DIMENSION_MISMATCH = 4,
  EEM_STATUS_NUMERICAL = 5,
  EEM_STATUS_IO = 6,
  EEM_STATUS_MODEL_FILE = 7,
  EEM_STATUS_UNSUPPORTED = 8,
  EEM_STATUS_PANIC = 9,
} EemStatus;

/**
 * Opaque model handle. Create with `eem_fit` or `eem_load`, release with
 * `eem_free`.
 */
typedef struct EemHandle EemHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message of the last failing call on this thread, or null if
 * none. The pointer stays valid until the next failing call on this thread.
 */
const char *eem_last_error(void);

/**
 * Fits a model on `n` rows of `d` features and writes a new handle to `out`.
 *
 * Features are min-max scaled to [0, 1] before fitting and the scaling is
 * stored in the model. `algorithm` is one of `EEM_ALGO_*`; `activation`
 * (one of `EEM_ACT_*`) is ignored for EEKM and `gamma` is only used by it.
 *
 * # Safety
 *
 * `x` must point to `n * d` doubles, `labels` to `n` ints and `out` to
 * writable storage for one pointer.
 */
enum EemStatus eem_fit(const double *x,
                       const int32_t *labels,
                       uintptr_t n,
                       uintptr_t d,
                       int32_t algorithm,
                       int32_t activation,
                       uintptr_t h,
                       double gamma,
                       uint64_t seed,
                       struct EemHandle **out);

/**
 * Loads a model file written by `eem_save` or the `eem train` command.
 *
 * # Safety
 *
 * `path` must be a nul-terminated string and `out` writable storage for one
 * pointer.
 */
enum EemStatus eem_load(const char *path, struct EemHandle **out);

/**
 * Writes the model as JSON to `path`.
 *
 * # Safety
 *
 * `model` must be a live handle and `path` a nul-terminated string.
 */
enum EemStatus eem_save(const struct EemHandle *model, const char *path);

/**
 * Number of input features the model expects, or 0 for a null handle.
 *
 * # Safety
 *
 * `model` must be null or a live handle.
 */
uintptr_t eem_input_dim(const struct EemHandle *model);

/**
 * Predicts ±1 labels for `n` rows of `d` features.
 *
 * # Safety
 *
 * `model` must be a live handle, `x` must point to `n * d` doubles and `out`
 * to room for `n` ints.
 */
enum EemStatus eem_predict(const struct EemHandle *model,
                           const double *x,
                           uintptr_t n,
                           uintptr_t d,
                           int32_t *out);

/**
 * Posterior probability of the positive class under the fitted projected
 * Gaussians (EEM/EEKM only).
 *
 * # Safety
 *
 * As for `eem_predict`, with `out` pointing to room for `n` doubles.
 */
enum EemStatus eem_predict_proba(const struct EemHandle *model,
                                 const double *x,
                                 uintptr_t n,
                                 uintptr_t d,
                                 double *out);

/**
 * Labels minimising expected cost, where `c_pos` is the cost of missing a
 * positive and `c_neg` of missing a negative (EEM/EEKM only).
 *
 * # Safety
 *
 * As for `eem_predict`.
 */
enum EemStatus eem_predict_cost_sensitive(const struct EemHandle *model,
                                          const double *x,
                                          uintptr_t n,
                                          uintptr_t d,
                                          double c_pos,
                                          double c_neg,
                                          int32_t *out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 *
 * `model` must be null or a handle not yet freed.
 */
void eem_free(struct EemHandle *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EEM_H */
