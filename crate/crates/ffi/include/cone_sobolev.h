#ifndef CONE_SOBOLEV_H
#define CONE_SOBOLEV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_ARGUMENT = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_DOMAIN = 3,
  CS_STATUS_VALIDATION = 4,
  CS_STATUS_NUMERICAL = 5,
  CS_STATUS_PRECONDITION = 6,
  CS_STATUS_INFEASIBLE = 7,
  CS_STATUS_RESOURCE = 8,
  CS_STATUS_INTERNAL = 9,
  CS_STATUS_IO = 10,
  CS_STATUS_JSON = 11,
  CS_STATUS_PANIC = 12,
} CsStatus;

typedef struct CsCone CsCone;

typedef struct CsProfile CsProfile;

typedef struct CsSystem CsSystem;

typedef struct CsQuotientReport {
  double numerator;
  double denominator;
  double quotient;
  double embedding_norm;
  double ratio;
  bool within_bound;
} CsQuotientReport;

typedef struct CsLowerBound {
  double bound;
  double empirical_min;
  size_t directions;
  bool pass;
} CsLowerBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success. Owned by the library.
 */
const char *cs_last_error_message(void);

/**
 * Built-in cone: `halfplane-x1`, `quadrant-x1x2`, `plane` or `space3`.
 */
enum CsStatus cs_cone_new_builtin(const char *name, struct CsCone **out_cone);

/**
 * Cone from a JSON specification such as `{"d":2,"exponents":[{"axis":1,"power":1.0}]}`.
 */
enum CsStatus cs_cone_from_json(const char *json, struct CsCone **out_cone);

void cs_cone_free(struct CsCone *cone);

enum CsStatus cs_cone_dimension(const struct CsCone *cone, size_t *out_d);

/**
 * `D = d + α`.
 */
enum CsStatus cs_cone_homogeneous_dimension(const struct CsCone *cone, double *out_big_d);

/**
 * Weighted measure of the unit ball, `C_D`.
 */
enum CsStatus cs_cone_ball_constant(const struct CsCone *cone, double *out_c);

/**
 * Sharp embedding norm for `1 <= q <= p < D`.
 */
enum CsStatus cs_embedding_norm(const struct CsCone *cone, double p, double q, double *out_norm);

/**
 * Piecewise-affine radial profile through `(t[i], v[i])`; values nonincreasing, last value 0.
 */
enum CsStatus cs_profile_from_knots(const struct CsCone *cone,
                                    const double *t,
                                    const double *v,
                                    size_t len,
                                    struct CsProfile **out_profile);

/**
 * Truncated power profile on `(0, t_max]` with flat head below `t_max / ratio`, for exponents `(p, q)`.
 */
enum CsStatus cs_profile_alvino(const struct CsCone *cone,
                                double p,
                                double q,
                                double ratio,
                                double t_max,
                                struct CsProfile **out_profile);

void cs_profile_free(struct CsProfile *profile);

/**
 * Sobolev quotient of a profile.
 */
enum CsStatus cs_quotient(const struct CsProfile *profile,
                          double p,
                          double q,
                          struct CsQuotientReport *out_report);

/**
 * Almost-extremal system of `m` shells with `λ = lambda_frac · ‖E‖`.
 */
enum CsStatus cs_system_construct(const struct CsCone *cone,
                                  double p,
                                  double q,
                                  size_t m,
                                  double lambda_frac,
                                  double eps1,
                                  double eps2,
                                  struct CsSystem **out_system);

void cs_system_free(struct CsSystem *system);

enum CsStatus cs_system_shell_count(const struct CsSystem *system, size_t *out_m);

/**
 * Certified bound and the smallest quotient over `directions` random span directions.
 */
enum CsStatus cs_system_lower_bound(const struct CsSystem *system,
                                    size_t directions,
                                    uint64_t seed,
                                    struct CsLowerBound *out_bound);

/**
 * System as JSON; release the string with [`cs_string_free`].
 */
enum CsStatus cs_system_to_json(const struct CsSystem *system, char **out_json);

void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONE_SOBOLEV_H */
