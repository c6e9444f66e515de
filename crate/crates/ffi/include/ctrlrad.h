/* C interface for the ctrlrad controllability-radius library.
 *
 * Conventions:
 *  - Every fallible function returns a CtrlradStatus; CTRLRAD_OK is 0.
 *  - On error a thread-local message is set; fetch it with
 *    ctrlrad_last_error_message(). The pointer stays valid until the next
 *    failing call on the same thread.
 *  - Matrix buffers are dense row-major double arrays; mask buffers are
 *    uint8_t with nonzero = entry free to perturb. A null mask pointer
 *    means "all entries free".
 *  - Opaque handles must be released with their _free function; _free
 *    accepts null.
 *
 * This header is maintained by hand alongside the Rust implementation in
 * src/lib.rs.
 */

#ifndef CTRLRAD_H
#define CTRLRAD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum CtrlradStatus {
  CTRLRAD_OK = 0,
  CTRLRAD_NULL_ARGUMENT = 1,
  CTRLRAD_INVALID_DIMENSION = 2,
  CTRLRAD_NON_FINITE = 3,
  CTRLRAD_EMPTY_MASK = 4,
  CTRLRAD_SINGULAR_PENCIL = 5,
  CTRLRAD_WRONG_KIND = 6,
  CTRLRAD_INTERNAL = 7,
} CtrlradStatus;

/* Opaque handles. */
typedef struct CtrlradSystem CtrlradSystem;
typedef struct CtrlradResult CtrlradResult;

/* Solver options. partition_col < 0 selects the last column; multistart
 * != 0 tries every partition column and keeps the minimum-norm result. */
typedef struct CtrlradSolverOptions {
  double omega;
  double epsilon;
  size_t max_iter;
  ptrdiff_t partition_col;
  int multistart;
} CtrlradSolverOptions;

/* Last error message on this thread, or null. */
const char *ctrlrad_last_error_message(void);

/* Fills *out with the default solver options. */
CtrlradStatus ctrlrad_solver_options_default(CtrlradSolverOptions *out);

/* Descriptor system E z' = A z + B u. e: n*n, a: n*n, b: n*m, row-major. */
CtrlradStatus ctrlrad_system_create_descriptor(size_t n, size_t m,
                                               const double *e,
                                               const double *a,
                                               const double *b,
                                               CtrlradSystem **out);

/* Order-`degree` model P_d x^(d) + ... + P_0 x = b u. `coefficients` holds
 * degree+1 matrices of state_dim*state_dim doubles, highest order first,
 * concatenated row-major; `input` is state_dim*input_dim. */
CtrlradStatus ctrlrad_system_create_higher_order(size_t degree,
                                                 size_t state_dim,
                                                 size_t input_dim,
                                                 const double *coefficients,
                                                 const double *input,
                                                 CtrlradSystem **out);

void ctrlrad_system_free(CtrlradSystem *sys);

/* Controllability through the block-Toeplitz rank criterion (higher-order
 * systems are tested through their canonical descriptor form). Writes 1 or
 * 0 to *out_controllable. rel_tol <= 0 selects the default tolerance. */
CtrlradStatus ctrlrad_system_is_controllable(const CtrlradSystem *sys,
                                             double rel_tol,
                                             int *out_controllable);

/* Structured radius of controllability for a descriptor system. Masks:
 * mask_e n*n, mask_a n*n, mask_b n*m (uint8_t, nonzero = free; null = all
 * free). options may be null for defaults. */
CtrlradStatus ctrlrad_compute_radius_descriptor(const CtrlradSystem *sys,
                                                const uint8_t *mask_e,
                                                const uint8_t *mask_a,
                                                const uint8_t *mask_b,
                                                const CtrlradSolverOptions *options,
                                                CtrlradResult **out);

/* Structured radius for a higher-order model. coeff_masks holds degree+1
 * matrices of state_dim*state_dim bytes (highest order first); input_mask
 * is state_dim*input_dim. Null masks mean all free; the canonical filler
 * entries stay fixed regardless. */
CtrlradStatus ctrlrad_compute_radius_higher_order(const CtrlradSystem *sys,
                                                  const uint8_t *coeff_masks,
                                                  const uint8_t *input_mask,
                                                  const CtrlradSolverOptions *options,
                                                  CtrlradResult **out);

void ctrlrad_result_free(CtrlradResult *result);

double ctrlrad_result_radius_frobenius(const CtrlradResult *result);
double ctrlrad_result_radius_spectral(const CtrlradResult *result);
size_t ctrlrad_result_iterations(const CtrlradResult *result);
size_t ctrlrad_result_refine_iterations(const CtrlradResult *result);
int ctrlrad_result_converged(const CtrlradResult *result);
int ctrlrad_result_uncontrollability_verified(const CtrlradResult *result);
size_t ctrlrad_result_partition_col(const CtrlradResult *result);

/* Dimensions (n, m) of the descriptor-level perturbation held by the
 * result; for higher-order inputs these are the canonical-form dimensions
 * n = state_dim * degree, m = input_dim. */
CtrlradStatus ctrlrad_result_dims(const CtrlradResult *result, size_t *out_n,
                                  size_t *out_m);

/* Copies the optimal perturbation (dE, dA, dB) into row-major buffers of
 * sizes n*n, n*n, n*m. */
CtrlradStatus ctrlrad_result_perturbation(const CtrlradResult *result,
                                          double *out_delta_e,
                                          double *out_delta_a,
                                          double *out_delta_b);

/* Copies the perturbed triple (E+dE, A+dA, B+dB), same layout. */
CtrlradStatus ctrlrad_result_perturbed_system(const CtrlradResult *result,
                                              double *out_e, double *out_a,
                                              double *out_b);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CTRLRAD_H */
