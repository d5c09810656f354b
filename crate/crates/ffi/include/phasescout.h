#ifndef PHASESCOUT_H
#define PHASESCOUT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_SHAPE = 3,
  PS_STATUS_NUMERICAL = 4,
  PS_STATUS_IO = 5,
  PS_STATUS_FORMAT = 6,
  PS_STATUS_INCOMPLETE = 7,
  PS_STATUS_REFUSED = 8,
  PS_STATUS_BUFFER_TOO_SMALL = 9,
  PS_STATUS_PANIC = 99,
} PsStatus;

typedef enum PsInputKind {
  PS_INPUT_KIND_ES = 0,
  PS_INPUT_KIND_THETA = 1,
  PS_INPUT_KIND_CSF = 2,
} PsInputKind;

/**
 * A trained autoencoder.
 */
typedef struct PsAutoencoder PsAutoencoder;

/**
 * A converged (or flagged) ground-state record.
 */
typedef struct PsGroundState PsGroundState;

/**
 * Chain and solver settings for [`ps_ground_state_compute`].
 */
typedef struct PsChainParams {
  double t;
  double u;
  double v;
  uint32_t n_max;
  uint32_t length;
  /**
   * Negative selects unit filling.
   */
  int32_t particles;
  uint32_t chi_max;
  uint64_t seed;
} PsChainParams;

/**
 * Scalar diagnostics of a ground state.
 */
typedef struct PsObservables {
  double energy;
  double o_sf;
  double o_dw;
  double o_hi;
  double structure_factor;
  double k_star;
  double central_entropy;
  double xi;
  int32_t converged;
} PsObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ps_version(void);

/**
 * Message of the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ps_last_error(void);

/**
 * Defaults: t = 1, U = V = 0, n_max = 3, L = 32, unit filling, chi = 50.
 */
struct PsChainParams ps_chain_params_default(void);

/**
 * Runs DMRG for one parameter point.
 *
 * # Safety
 * `params` must point to a valid struct and `out` to writable storage.
 */
enum PsStatus ps_ground_state_compute(const struct PsChainParams *params,
                                      struct PsGroundState **out);

/**
 * Reads a `.gsr` record file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PsStatus ps_ground_state_load(const char *path, struct PsGroundState **out);

/**
 * Writes the record in the cache format.
 *
 * # Safety
 * `gs` must be a live handle and `path` a NUL-terminated string.
 */
enum PsStatus ps_ground_state_save(const struct PsGroundState *gs, const char *path);

/**
 * # Safety
 * `gs` must be a live handle and `out` writable.
 */
enum PsStatus ps_ground_state_observables(const struct PsGroundState *gs,
                                          struct PsObservables *out);

/**
 * Schmidt values of `bond` (1..L-1). `*len` receives the full count; at
 * most `cap` values are copied to `values`, which may be NULL to query the
 * size. Returns `BUFFER_TOO_SMALL` if `cap` is short.
 *
 * # Safety
 * `values` must hold `cap` doubles (or be NULL) and `len` be writable.
 */
enum PsStatus ps_ground_state_spectrum(const struct PsGroundState *gs,
                                       uint32_t bond,
                                       double *values,
                                       size_t cap,
                                       size_t *len);

/**
 * # Safety
 * `gs` must come from this library and not be used afterwards.
 */
void ps_ground_state_free(struct PsGroundState *gs);

/**
 * Reads an autoencoder checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PsStatus ps_autoencoder_load(const char *path, struct PsAutoencoder **out);

/**
 * Input shape `(C, W)` or `(C, H, W)`. `*rank` receives the rank; `dims`
 * must hold at least 3 entries.
 *
 * # Safety
 * `dims` must hold 3 entries and `rank` be writable.
 */
enum PsStatus ps_autoencoder_input_shape(const struct PsAutoencoder *ae,
                                         size_t *dims,
                                         size_t *rank);

/**
 * Reconstruction loss of a row-major input of the model's input shape.
 *
 * # Safety
 * `data` must hold `len` doubles and `loss` be writable.
 */
enum PsStatus ps_autoencoder_loss(const struct PsAutoencoder *ae,
                                  const double *data,
                                  size_t len,
                                  double *loss);

/**
 * Reconstruction loss of a record's exported input of `kind`.
 *
 * # Safety
 * Both handles must be live and `loss` writable.
 */
enum PsStatus ps_autoencoder_record_loss(const struct PsAutoencoder *ae,
                                         const struct PsGroundState *gs,
                                         enum PsInputKind kind,
                                         double *loss);

/**
 * # Safety
 * `ae` must come from this library and not be used afterwards.
 */
void ps_autoencoder_free(struct PsAutoencoder *ae);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASESCOUT_H */
