/* C interface for the qomor model-order-reduction toolkit. */

#ifndef QOMOR_H
#define QOMOR_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum {
  QomorStatus_Ok = 0,
  /**
   * Invalid arguments or malformed input.
   */
  QomorStatus_Invalid = 2,
  /**
   * Numerical failure (non-Hurwitz matrix, divergence, rank collapse).
   */
  QomorStatus_Numerical = 3,
  /**
   * File system failure.
   */
  QomorStatus_Io = 4,
} QomorStatus;

/**
 * Which matrix to copy out of a handle.
 */
typedef enum {
  QomorMatrix_A = 0,
  QomorMatrix_B = 1,
  QomorMatrix_M = 2,
} QomorMatrix;

/**
 * Reduction method selector.
 */
typedef enum {
  QomorMethod_Spbt = 0,
  QomorMethod_Ltbt = 1,
} QomorMethod;

/**
 * Opaque handle around an LD_QO system.
 */
typedef struct QomorSystem QomorSystem;

/**
 * Input-signal selector for simulation and bounds.
 */
typedef struct {
  /**
   * 0: amplitude * exp(-param * t)
   * 1: amplitude * exp(-t / param) * t^2
   * 2: amplitude * sin(2 pi t / param) + offset
   */
  int32_t kind;
  double amplitude;
  double param;
  /**
   * Offset for kind 2; ignored otherwise.
   */
  double offset;
} QomorSignal;

/**
 * Output-error bound data for a (system, reduction, signal) triple.
 */
typedef struct {
  double h2_error;
  double u_tensor_l2;
  double linf_bound;
  double observed_linf;
} QomorBoundReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message raised on this thread; valid until the next failing
 * call on the same thread.
 */
const char *qomor_last_error_message(void);

/**
 * Build a system from row-major `A` (n x n), `B` (n x m) and `M` (n x n).
 * `M` is symmetrized, which leaves the quadratic output unchanged.
 *
 * # Safety
 * `a`, `b`, `m` must point to readable buffers of n*n, n*m and n*n
 * doubles; `out` must be a valid pointer to receive the handle.
 */
QomorStatus qomor_system_new(uintptr_t n,
                             uintptr_t m,
                             const double *a,
                             const double *b,
                             const double *m_weight,
                             QomorSystem **out);

/**
 * Read a system manifest from a UTF-8 path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
QomorStatus qomor_system_read(const char *path, QomorSystem **out);

/**
 * Write a system manifest.
 *
 * # Safety
 * `sys` must be a live handle from this library; `path` NUL-terminated.
 */
QomorStatus qomor_system_write(const QomorSystem *sys, const char *path);

/**
 * Release a handle. Passing NULL is a no-op.
 *
 * # Safety
 * `sys` must be a handle from this library, not yet freed.
 */
void qomor_system_free(QomorSystem *sys);

/**
 * State dimension; 0 for a null handle.
 *
 * # Safety
 * `sys` must be a live handle or NULL.
 */
uintptr_t qomor_system_order(const QomorSystem *sys);

/**
 * Input dimension; 0 for a null handle.
 *
 * # Safety
 * `sys` must be a live handle or NULL.
 */
uintptr_t qomor_system_inputs(const QomorSystem *sys);

/**
 * Copy one system matrix (row-major) into `buf`, which holds `cap`
 * doubles; `written` receives the entry count.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles.
 */
QomorStatus qomor_system_matrix(const QomorSystem *sys,
                                QomorMatrix which,
                                double *buf,
                                uintptr_t cap,
                                uintptr_t *written);

/**
 * Singular values of the chosen Gramian pair, descending. `buf` holds
 * `cap` doubles; `written` receives how many were produced.
 *
 * # Safety
 * Pointer contracts as in [`qomor_system_matrix`].
 */
QomorStatus qomor_singular_values(const QomorSystem *sys,
                                  QomorMethod method,
                                  double *buf,
                                  uintptr_t cap,
                                  uintptr_t *written);

/**
 * Reduce to order `r`; the result is a new LD_QO handle (for LTBT, the
 * induced quadratic-output model).
 *
 * # Safety
 * `sys` live handle; `out` valid.
 */
QomorStatus qomor_reduce(const QomorSystem *sys,
                         QomorMethod method,
                         uintptr_t order,
                         QomorSystem **out);

/**
 * H2 norm of a system.
 *
 * # Safety
 * `sys` live handle; `out` valid.
 */
QomorStatus qomor_h2_norm(const QomorSystem *sys, double *out);

/**
 * H2 norm of the error system between a system and its reduction.
 *
 * # Safety
 * Both handles live; `out` valid.
 */
QomorStatus qomor_h2_error(const QomorSystem *sys, const QomorSystem *reduced, double *out);

/**
 * A posteriori L-infinity bound, with both systems simulated under the
 * signal over `[0, t_final]` at step `dt`.
 *
 * # Safety
 * Handles live; `out` valid.
 */
QomorStatus qomor_linf_bound(const QomorSystem *sys,
                             const QomorSystem *reduced,
                             QomorSignal signal,
                             double t_final,
                             double dt,
                             QomorBoundReport *out);

/**
 * Simulate the quadratic output on a uniform grid. `y` must hold at least
 * `round(t_final / dt) + 1` doubles; `written` receives the sample count.
 *
 * # Safety
 * `sys` live handle, `y` writable for `cap` doubles, `written` valid.
 */
QomorStatus qomor_simulate(const QomorSystem *sys,
                           QomorSignal signal,
                           double t_final,
                           double dt,
                           double *y,
                           uintptr_t cap,
                           uintptr_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QOMOR_H */
