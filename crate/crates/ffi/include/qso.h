#ifndef QSO_H
#define QSO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum QsoStatus {
  QSO_STATUS_OK = 0,
  QSO_STATUS_NULL_POINTER = 1,
  QSO_STATUS_INVALID_ARGUMENT = 2,
  QSO_STATUS_PARSE = 3,
  QSO_STATUS_VALIDATION = 4,
  QSO_STATUS_PANIC = 5,
} QsoStatus;

// Opaque handle to the Markov family of an operator and start point.
typedef struct QsoFamilyHandle QsoFamilyHandle;

// Opaque operator handle.
typedef struct QsoOperatorHandle QsoOperatorHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call on the same thread.
const char *qso_last_error(void);

// Library version as a static string.
const char *qso_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void qso_string_free(char *s);

// Parses an operator file given as JSON text.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum QsoStatus qso_operator_from_json(const char *json,
                                      bool symmetrize,
                                      struct QsoOperatorHandle **out);

// The two-type operator `V_a`.
//
// # Safety
// `out` must be writable.
enum QsoStatus qso_operator_va(double a, struct QsoOperatorHandle **out);

// # Safety
// `op` must come from this library and not have been freed. Null is ignored.
void qso_operator_free(struct QsoOperatorHandle *op);

// Number of types `n`.
//
// # Safety
// `op` must be a live handle; `out` must be writable.
enum QsoStatus qso_operator_dim(const struct QsoOperatorHandle *op, size_t *out);

// Coefficient `P[ij,k]` with 1-based indices.
//
// # Safety
// `op` must be a live handle; `out` must be writable.
enum QsoStatus qso_operator_coef(const struct QsoOperatorHandle *op,
                                 size_t i,
                                 size_t j,
                                 size_t k,
                                 double *out);

// Writes `V(x)` into `out[0..n]`.
//
// # Safety
// `x` and `out` must point to `n` doubles.
enum QsoStatus qso_operator_evaluate(const struct QsoOperatorHandle *op,
                                     const double *x,
                                     size_t n,
                                     double *out);

// Contraction modulus `max sum_j |P[i1 k, j] - P[i2 k, j]|`.
//
// # Safety
// `op` must be a live handle; `out` must be writable.
enum QsoStatus qso_operator_contraction_modulus(const struct QsoOperatorHandle *op, double *out);

// Fixed points with residual at most `tol`, as JSON.
//
// # Safety
// `op` must be a live handle; `out` must be writable.
enum QsoStatus qso_operator_fixed_points_json(const struct QsoOperatorHandle *op,
                                              double tol,
                                              char **out);

// Full classification report as JSON. `resolution = 0` selects the
// default lattice for the dimension.
//
// # Safety
// `op` must be a live handle; `out` must be writable.
enum QsoStatus qso_operator_classify_json(const struct QsoOperatorHandle *op,
                                          size_t resolution,
                                          size_t samples,
                                          uint64_t seed,
                                          char **out);

// Markov family of `op` started at `x`. The operator is copied.
//
// # Safety
// `op` must be a live handle, `x` must point to `n` doubles, and `out`
// must be writable.
enum QsoStatus qso_family_new(const struct QsoOperatorHandle *op,
                              const double *x,
                              size_t n,
                              struct QsoFamilyHandle **out);

// # Safety
// `fam` must come from this library and not have been freed. Null is ignored.
void qso_family_free(struct QsoFamilyHandle *fam);

// Writes `x^(k)` into `out[0..n]`.
//
// # Safety
// `fam` must be a live handle; `out` must point to `n` doubles.
enum QsoStatus qso_family_state(const struct QsoFamilyHandle *fam, size_t k, double *out, size_t n);

// Writes `H^[k,k+1]` row-major into `out[0..n*n]`.
//
// # Safety
// `fam` must be a live handle; `out` must point to `len` doubles.
enum QsoStatus qso_family_transition_matrix(const struct QsoFamilyHandle *fam,
                                            size_t k,
                                            double *out,
                                            size_t len);

// Measure of the cylinder with 1-based `states[0..len]` at times `l..`.
//
// # Safety
// `fam` must be a live handle; `states` must point to `len` values and
// `out` must be writable.
enum QsoStatus qso_family_cylinder_measure(const struct QsoFamilyHandle *fam,
                                           size_t l,
                                           const size_t *states,
                                           size_t len,
                                           double *out);

// Absolute-continuity series for `V_{a1}` from `(x1, 1 - x1)` against
// `V_{a2}` from `(y1, 1 - y1)`, as JSON.
//
// # Safety
// `out` must be writable.
enum QsoStatus qso_abscont_json(double a1,
                                double x1,
                                double a2,
                                double y1,
                                size_t m_max,
                                char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSO_H */
