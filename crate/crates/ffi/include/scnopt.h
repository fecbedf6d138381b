#ifndef SCNOPT_H
#define SCNOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum ScnStatus {
  SCN_STATUS_OK = 0,
  SCN_STATUS_NULL_POINTER = 1,
  SCN_STATUS_INVALID_UTF8 = 2,
  SCN_STATUS_PARSE = 3,
  SCN_STATUS_INVALID_ARGUMENT = 4,
  SCN_STATUS_DIMENSION = 5,
  SCN_STATUS_INFEASIBLE = 6,
  SCN_STATUS_BUFFER_TOO_SMALL = 7,
  SCN_STATUS_PANIC = 8,
} ScnStatus;

/**
 * Solver outcome, mirroring the library's termination statuses.
 */
typedef enum ScnSolveStatus {
  SCN_SOLVE_STATUS_EPS_FEASIBLE_CONVERGED = 0,
  SCN_SOLVE_STATUS_RHO_CAP_REACHED = 1,
  SCN_SOLVE_STATUS_MAX_OUTER_REACHED = 2,
  SCN_SOLVE_STATUS_INNER_FAILURE = 3,
} ScnSolveStatus;

/**
 * A parsed problem file: form, solver parameters and start point.
 */
typedef struct ScnProblem ScnProblem;

/**
 * The outcome of [`scn_solve`].
 */
typedef struct ScnResult ScnResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *scn_last_error(void);

/**
 * Parses a problem file given as JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ScnStatus scn_problem_from_json(const char *json, struct ScnProblem **out);

/**
 * # Safety
 * `problem` must come from [`scn_problem_from_json`] and not be freed twice.
 */
void scn_problem_free(struct ScnProblem *problem);

/**
 * Block sizes `n`, `m1`, `m2` of the problem's form.
 *
 * # Safety
 * All pointers must be valid.
 */
enum ScnStatus scn_problem_dims(const struct ScnProblem *problem,
                                size_t *n,
                                size_t *m1,
                                size_t *m2);

/**
 * Evaluates `g` at the witness point of `x`. The point `(x, y, z)` is
 * written to `out` when it is not null; `written` receives its length.
 *
 * # Safety
 * `x` must hold `n` values and `out` at least `cap`.
 */
enum ScnStatus scn_witness(const struct ScnProblem *problem,
                           const double *x,
                           size_t n,
                           double *g_value,
                           double *out,
                           size_t cap,
                           size_t *written);

/**
 * Runs the alternating penalty solver with the file's parameters and start.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum ScnStatus scn_solve(const struct ScnProblem *problem, struct ScnResult **out);

/**
 * # Safety
 * `result` must come from [`scn_solve`] and not be freed twice.
 */
void scn_result_free(struct ScnResult *result);

/**
 * # Safety
 * Both pointers must be valid.
 */
enum ScnStatus scn_result_status(const struct ScnResult *result, enum ScnSolveStatus *status);

/**
 * Number of outer iterations, or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t scn_result_iterations(const struct ScnResult *result);

/**
 * Copies the final `(x, y, z)`; `written` receives the full length even
 * when `cap` is too small.
 *
 * # Safety
 * `out` must hold at least `cap` values.
 */
enum ScnStatus scn_result_point(const struct ScnResult *result,
                                double *out,
                                size_t cap,
                                size_t *written);

/**
 * The solve summary as JSON, owned by the result handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
const char *scn_result_json(const struct ScnResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCNOPT_H */
