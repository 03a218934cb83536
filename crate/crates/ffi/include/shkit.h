#ifndef SHKIT_H
#define SHKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ShkStatus {
  /**
   * Success.
   */
  ShkOk = 0,
  /**
   * A required pointer was null.
   */
  ShkNullArgument = 1,
  /**
   * Input rejected: non-finite entries, a metric that is not positive
   * semidefinite, a bad rank request, or dimensions that do not match.
   */
  ShkBadInput = 2,
  /**
   * The operator moves the metric's null space off itself, so no metric
   * adjoint exists and seminorm quantities are undefined for it.
   */
  ShkIncompatible = 3,
  /**
   * An internal invariant failed (a bug worth reporting).
   */
  ShkInternal = 4,
} ShkStatus;

/**
 * An operator validated as compatible with its space's metric. Opaque.
 */
typedef struct ShkOp ShkOp;

/**
 * A positive-semidefinite metric with its spectral data. Opaque.
 */
typedef struct ShkSpace ShkSpace;

/**
 * Builds a metric space from a `dim`×`dim` PSD matrix (interleaved buffer of
 * `2*dim*dim` doubles). `rtol` controls rank detection and compatibility
 * thresholds; pass a non-positive value for the default `1e-10`. On success
 * writes a handle to `out`; release it with [`shk_space_free`].
 */
enum ShkStatus shk_space_new(const double *metric,
                             uintptr_t dim,
                             double rtol,
                             struct ShkSpace **out);

/**
 * Ambient dimension of the space; 0 for a null handle.
 */
uintptr_t shk_space_dim(const struct ShkSpace *space);

/**
 * Detected rank of the metric; 0 for a null handle.
 */
uintptr_t shk_space_rank(const struct ShkSpace *space);

/**
 * Releases a space handle. Null is a no-op. Operators created from the
 * space keep their own reference and stay valid after this call.
 */
void shk_space_free(struct ShkSpace *space);

/**
 * Wraps a `dim`×`dim` operator (interleaved buffer) over the space,
 * validating that it keeps the metric's null space inside itself. On
 * success writes a handle to `out`; release it with [`shk_op_free`].
 */
enum ShkStatus shk_op_new(const struct ShkSpace *space, const double *entries, struct ShkOp **out);

/**
 * Releases an operator handle. Null is a no-op.
 */
void shk_op_free(struct ShkOp *op);

/**
 * Operator seminorm induced by the metric.
 */
enum ShkStatus shk_op_seminorm(const struct ShkOp *op, double *out);

/**
 * Numerical radius induced by the metric.
 */
enum ShkStatus shk_op_numerical_radius(const struct ShkOp *op, double *out);

/**
 * Spectral radius of the operator's action on the metric's range.
 */
enum ShkStatus shk_op_spectral_radius(const struct ShkOp *op, double *out);

/**
 * Metric adjoint, written as `2*dim*dim` interleaved doubles into `out`.
 */
enum ShkStatus shk_op_sharp(const struct ShkOp *op, double *out);

/**
 * The equivalent matrix on the metric's range coordinates, written as
 * `2*rank*rank` interleaved doubles into `out` (query the rank with
 * [`shk_space_rank`] to size the buffer).
 */
enum ShkStatus shk_op_compress(const struct ShkOp *op, double *out);

/**
 * Runs the full randomized verification suite (every registered bound and
 * identity) and writes the report as a NUL-terminated JSON string to `out`.
 * The string is owned by the library; release it with [`shk_string_free`].
 * Returns `ShkOk` whether or not the suite found violations — consult the
 * report's `all_hold` field — and an error status only when the run could
 * not execute at all.
 */
enum ShkStatus shk_verify_json(uintptr_t dim,
                               uintptr_t rank,
                               uint64_t trials,
                               uint64_t seed,
                               char **out);

/**
 * Releases a string returned by [`shk_verify_json`]. Null is a no-op.
 */
void shk_string_free(char *text);

#endif  /* SHKIT_H */
