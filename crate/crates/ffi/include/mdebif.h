#ifndef MDEBIF_H
#define MDEBIF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of an API call.
typedef enum MdbStatus {
  MDB_STATUS_OK = 0,
  // Malformed or inconsistent input.
  MDB_STATUS_VALIDATION = 2,
  // The computation failed: domain exit, no convergence, singular matrix.
  MDB_STATUS_NUMERIC = 3,
  // A required pointer argument was null.
  MDB_STATUS_NULL_POINTER = 4,
  // A string argument was not valid UTF-8.
  MDB_STATUS_INVALID_UTF8 = 5,
  // The library panicked; this is a bug.
  MDB_STATUS_PANIC = 6,
} MdbStatus;

// A solution path on `[0, T]`.
typedef struct MdbPath MdbPath;

// A problem definition with its solver settings.
typedef struct MdbProblem MdbProblem;

// Outcome of the Lomtatidze test for `y'' + q(t) y = 0`.
typedef struct MdbCriterion {
  double q_minus;
  double q_plus;
  double product;
  double two_over_pi;
  // Nonzero when the test proves the periodic problem has only the
  // trivial solution; zero when it is inconclusive.
  int32_t unique_trivial;
} MdbCriterion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next API call on the same thread.
const char *mdb_last_error_message(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void mdb_string_free(char *s);

// Parses a JSON problem file.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum MdbStatus mdb_problem_from_json(const char *json, struct MdbProblem **out);

// Loads a built-in problem by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum MdbStatus mdb_problem_builtin(const char *name, struct MdbProblem **out);

// Releases a problem. Null is ignored.
//
// # Safety
// `p` must come from `mdb_problem_*` and not have been freed.
void mdb_problem_free(struct MdbProblem *p);

// State dimension `n`, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t mdb_problem_dim(const struct MdbProblem *p);

// Period `T`, or NaN for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
double mdb_problem_period(const struct MdbProblem *p);

// Solves the initial value problem from `x0` (length `n`) on `[0, T]`.
//
// # Safety
// `p` must be a live problem handle, `x0` must point to `n` doubles and
// `out` must be writable.
enum MdbStatus mdb_solve(const struct MdbProblem *p,
                         double lambda,
                         const double *x0,
                         size_t n,
                         struct MdbPath **out);

// Writes `x(t)` into `out` (length `n`). At a jump time this is the
// left-continuous value.
//
// # Safety
// `path` must be a live path handle and `out` must point to `n` doubles.
enum MdbStatus mdb_path_eval(const struct MdbPath *path, double t, double *out, size_t n);

// Releases a path. Null is ignored.
//
// # Safety
// `path` must come from [`mdb_solve`] and not have been freed.
void mdb_path_free(struct MdbPath *path);

// Monodromy matrix along the trajectory from `x0`. Writes `M` row-major
// into `m_out` (`n*n` doubles) and `det(I - M)` into `det_out`.
//
// # Safety
// `p` must be a live problem handle, `x0` must point to `n` doubles,
// `m_out` to `n*n` writable doubles and `det_out` to one.
enum MdbStatus mdb_monodromy(const struct MdbProblem *p,
                             double lambda,
                             const double *x0,
                             size_t n,
                             double *m_out,
                             double *det_out);

// Periodic solution by damped Newton shooting from `guess`. On success
// `x_out` holds the periodic initial state and `iterations_out`, if not
// null, the number of Newton steps.
//
// # Safety
// `p` must be a live problem handle, `guess` and `x_out` must point to `n`
// doubles, `iterations_out` must be null or writable.
enum MdbStatus mdb_shoot(const struct MdbProblem *p,
                         double lambda,
                         const double *guess,
                         size_t n,
                         double tol,
                         size_t max_iter,
                         double *x_out,
                         size_t *iterations_out);

// Scans `det(I - M(λ))` on `steps` uniform points of `[lambda_min,
// lambda_max]` along the problem's branch state and returns the report as
// JSON in `json_out`, to be released with [`mdb_string_free`].
//
// # Safety
// `p` must be a live problem handle and `json_out` writable.
enum MdbStatus mdb_scan_json(const struct MdbProblem *p,
                             double lambda_min,
                             double lambda_max,
                             size_t steps,
                             char **json_out);

// Lomtatidze test for `y'' + q(t) y = 0` with `q` an expression in `t`.
//
// # Safety
// `q` must be a NUL-terminated string and `out` writable.
enum MdbStatus mdb_criterion(const char *q, double period, double tol, struct MdbCriterion *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDEBIF_H */
