/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef BDCERT_H
#define BDCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum BdcStatus {
  BDC_STATUS_OK = 0,
  BDC_STATUS_NULL_POINTER = 1,
  BDC_STATUS_INVALID_ARGUMENT = 2,
  BDC_STATUS_INVALID_MODEL = 3,
  BDC_STATUS_DIVERGENT_SERIES = 4,
  BDC_STATUS_NOT_ESSENTIAL = 5,
  BDC_STATUS_NOT_STABILIZED = 6,
  BDC_STATUS_ZERO_W = 7,
  BDC_STATUS_TARGET_UNREACHABLE = 8,
  BDC_STATUS_INITIAL_STATE_OUTSIDE = 9,
  BDC_STATUS_NUMERICAL = 10,
  BDC_STATUS_IO = 11,
  BDC_STATUS_PANIC = 12,
} BdcStatus;

// Which bound governs truncation-level selection.
typedef enum BdcCriterion {
  BDC_CRITERION_TV = 0,
  BDC_CRITERION_MEAN = 1,
  BDC_CRITERION_BOTH = 2,
} BdcCriterion;

// A truncation level with its bounds.
typedef struct BdcCertificate BdcCertificate;

// A validated model with its weight sequence and run defaults.
typedef struct BdcModel BdcModel;

// One period of the limiting regime.
typedef struct BdcRegime BdcRegime;

// One output time of a [`BdcRegime`].
typedef struct BdcRegimeSample {
  double t;
  double p0;
  double at_most_servers;
  double mean;
  double tv_bound;
} BdcRegimeSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *bdc_last_error(void);

// Library version as a static string.
const char *bdc_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void bdc_string_free(char *s);

// Loads `example1` .. `example4`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum BdcStatus bdc_model_from_preset(const char *name, struct BdcModel **out);

// Parses a JSON model description. Weights default to unit weights.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum BdcStatus bdc_model_from_json(const char *json, struct BdcModel **out);

// Replaces the weight sequence (`geometric:2`, `geometric-linear:9/8:200`, ...).
//
// # Safety
// `model` must be a live handle; `rule` a NUL-terminated string.
enum BdcStatus bdc_model_set_weights(struct BdcModel *model, const char *rule);

// Sets `S` in `Pr(X <= S)`.
//
// # Safety
// `model` must be a live handle.
enum BdcStatus bdc_model_set_servers(struct BdcModel *model, size_t servers);

// Model description as JSON; release with [`bdc_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum BdcStatus bdc_model_to_json(const struct BdcModel *model, char **out);

// # Safety
// `model` must be NULL or a handle not yet freed.
void bdc_model_free(struct BdcModel *model);

// Selects the smallest truncation level whose bound over
// `[window_start, window_end]` meets `target`.
//
// With `published_constants` the preset's published constants replace the
// self-certified ones.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum BdcStatus bdc_truncate(const struct BdcModel *model,
                            double target,
                            double window_start,
                            double window_end,
                            enum BdcCriterion criterion,
                            bool published_constants,
                            struct BdcCertificate **out);

// Bounds at a fixed truncation level.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum BdcStatus bdc_certificate_at_level(const struct BdcModel *model,
                                        size_t level,
                                        double window_start,
                                        double window_end,
                                        double target,
                                        bool published_constants,
                                        struct BdcCertificate **out);

// # Safety
// `cert` must be a live handle.
size_t bdc_certificate_level(const struct BdcCertificate *cert);

// Whether the certificate meets its target over the whole window.
//
// # Safety
// `cert` must be a live handle.
bool bdc_certificate_met(const struct BdcCertificate *cert);

// Total-variation bound at time `t`, or NaN for a NULL handle.
//
// # Safety
// `cert` must be a live handle.
double bdc_certificate_tv_at(const struct BdcCertificate *cert, double t);

// Mean bound at time `t`; fails with `ZeroW` when unavailable.
//
// # Safety
// `cert` must be a live handle; `out` must be writable.
enum BdcStatus bdc_certificate_mean_at(const struct BdcCertificate *cert, double t, double *out);

// Certificate as JSON; release with [`bdc_string_free`].
//
// # Safety
// `cert` must be a live handle; `out` must be writable.
enum BdcStatus bdc_certificate_to_json(const struct BdcCertificate *cert, char **out);

// # Safety
// `cert` must be NULL or a handle not yet freed.
void bdc_certificate_free(struct BdcCertificate *cert);

// Computes one period of the limiting regime from state 0 with total error `target`.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum BdcStatus bdc_regime(const struct BdcModel *model, double target, struct BdcRegime **out);

// # Safety
// `regime` must be a live handle.
size_t bdc_regime_len(const struct BdcRegime *regime);

// # Safety
// `regime` must be a live handle.
size_t bdc_regime_level(const struct BdcRegime *regime);

// # Safety
// `regime` must be a live handle; `out` must be writable.
enum BdcStatus bdc_regime_sample(const struct BdcRegime *regime,
                                 size_t index,
                                 struct BdcRegimeSample *out);

// Regime as JSON; release with [`bdc_string_free`].
//
// # Safety
// `regime` must be a live handle; `out` must be writable.
enum BdcStatus bdc_regime_to_json(const struct BdcRegime *regime, char **out);

// # Safety
// `regime` must be NULL or a handle not yet freed.
void bdc_regime_free(struct BdcRegime *regime);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDCERT_H */
