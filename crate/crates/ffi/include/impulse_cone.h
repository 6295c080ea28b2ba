#ifndef IMPULSE_CONE_H
#define IMPULSE_CONE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IcStatus {
  IC_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or an out-of-range argument.
  IC_STATUS_INVALID_ARGUMENT = 1,
  // The problem text or an expression in it did not parse.
  IC_STATUS_PARSE = 2,
  // Parsed, but the data violate a requirement.
  IC_STATUS_INVALID_PROBLEM = 3,
  IC_STATUS_NUMERICAL = 4,
  // The search ran but found no certificate or no solution.
  IC_STATUS_NOT_FOUND = 5,
  IC_STATUS_IO = 6,
  // A buffer passed in was too small; the needed length was written.
  IC_STATUS_BUFFER_TOO_SMALL = 7,
  IC_STATUS_PANIC = 8,
} IcStatus;

typedef enum IcVerdict {
  IC_VERDICT_NONE = 0,
  IC_VERDICT_H1 = 1,
  IC_VERDICT_H2 = 2,
} IcVerdict;

// Problem data loaded from a TOML description.
typedef struct IcProblem IcProblem;

// A computed solution on its nodal grid.
typedef struct IcSolution IcSolution;

typedef struct IcConstants {
  double m;
  double big_m;
  double gamma;
  double int_kcal_g;
  double c;
  double c1;
  double c2;
  double a0;
  double norm_gamma;
  double window_mass;
  // `NaN` when `gamma >= 1`.
  double i1_coefficient;
} IcConstants;

typedef struct IcVerifyReport {
  double operator_residual;
  double shooting_crosscheck;
  double jump_error;
  double derivative_jump_error;
  double right_boundary_error;
  double left_boundary_error;
} IcVerifyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Owned by the
// library and valid until the next call into it.
const char *ic_last_error(void);

// Library version as a static NUL-terminated string.
const char *ic_version(void);

// Parses a problem from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a writable pointer.
enum IcStatus ic_problem_from_toml(const char *toml, struct IcProblem **out);

// Reads and parses a problem file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum IcStatus ic_problem_load(const char *path, struct IcProblem **out);

// Releases a problem. Null is ignored.
//
// # Safety
// `p` must come from this library and not be used afterwards.
void ic_problem_free(struct IcProblem *p);

// # Safety
// `p` must be a live problem handle and `out` writable.
enum IcStatus ic_constants(const struct IcProblem *p, struct IcConstants *out);

// Checks the existence hypotheses for one pair `(rho1, rho2)`. Returns
// `Ok` with `None` written when neither holds.
//
// # Safety
// `p` must be a live problem handle and `verdict` writable.
enum IcStatus ic_check_pair(const struct IcProblem *p,
                            double rho1,
                            double rho2,
                            enum IcVerdict *verdict);

// Applies the operator to `samples` seeded random cone elements and writes
// how many images left the cone.
//
// # Safety
// `p` must be a live problem handle and `failures` writable.
enum IcStatus ic_cone_check(const struct IcProblem *p,
                            size_t samples,
                            uint64_t seed,
                            size_t *failures);

// Looks for a positive solution with norm in the band `[rho1, rho2/c]`.
// Writes null and returns `NotFound` when every start fails.
//
// # Safety
// `p` must be a live problem handle and `out` writable.
enum IcStatus ic_solve(const struct IcProblem *p,
                       double rho1,
                       double rho2,
                       struct IcSolution **out);

// # Safety
// `s` must come from this library and not be used afterwards.
void ic_solution_free(struct IcSolution *s);

// Number of nodes, counting both sides of each jump.
//
// # Safety
// `s` must be a live solution handle or null (which yields 0).
size_t ic_solution_len(const struct IcSolution *s);

// # Safety
// `s` must be a live solution handle; the outputs writable.
enum IcStatus ic_solution_stats(const struct IcSolution *s,
                                double *residual,
                                size_t *iterations,
                                double *sup_norm);

// Copies node times, sides (`-1` left of a jump, `1` right, `0` plain) and
// values into caller buffers of length `cap`. Any of the three may be null.
// When `cap` is too small the needed length goes to `len` and
// `BufferTooSmall` is returned.
//
// # Safety
// Non-null buffers must hold `cap` elements; `len` must be writable.
enum IcStatus ic_solution_nodes(const struct IcSolution *s,
                                double *t,
                                int32_t *side,
                                double *u,
                                size_t cap,
                                size_t *len);

// Residual, boundary and jump errors of a solution, plus its distance to a
// shooting solution.
//
// # Safety
// Both handles must be live and `out` writable.
enum IcStatus ic_verify(const struct IcProblem *p,
                        const struct IcSolution *s,
                        struct IcVerifyReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMPULSE_CONE_H */
