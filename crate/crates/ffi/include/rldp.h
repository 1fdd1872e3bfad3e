#ifndef RLDP_H
#define RLDP_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RldpStatus {
  RLDP_STATUS_OK = 0,
  RLDP_STATUS_NULL_POINTER = 1,
  RLDP_STATUS_INVALID_ARGUMENT = 2,
  RLDP_STATUS_SOLVER_FAILURE = 3,
  RLDP_STATUS_PANIC = 4,
} RldpStatus;

// Problem variants accepted by [`rldp_solve`]: nominal or robust utility,
// nominal or robust privacy.
typedef enum RldpVariant {
  RLDP_VARIANT_NUNP = 0,
  RLDP_VARIANT_NURP = 1,
  RLDP_VARIANT_RUNP = 2,
  RLDP_VARIANT_RURP = 3,
} RldpVariant;

// Joint distribution of the sensitive and useful data.
typedef struct RldpDistribution RldpDistribution;

// Release mechanism `P(y | s, u)`.
typedef struct RldpMechanism RldpMechanism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *rldp_last_error(void);

// Distribution over `s_size x u_size` cells from `len` nonnegative weights
// in row-major `(s, u)` order, normalized to sum to one.
//
// # Safety
// `weights` must point to `len` readable doubles and `out` must be writable.
enum RldpStatus rldp_distribution_new(size_t s_size,
                                      size_t u_size,
                                      const double *weights,
                                      size_t len,
                                      struct RldpDistribution **out);

// Distribution from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` must be writable.
enum RldpStatus rldp_distribution_from_json(const char *json, struct RldpDistribution **out);

// # Safety
// `dist` must be null or a handle from this library not yet freed.
void rldp_distribution_free(struct RldpDistribution *dist);

// Radius of the confidence set for `n` samples at level `1 - alpha`.
//
// # Safety
// `out` must be writable.
enum RldpStatus rldp_radius(uint64_t n, double alpha, size_t s_size, size_t u_size, double *out);

// Optimal mechanism of `variant` (an [`RldpVariant`] value) for the
// empirical distribution `phat`, squared distortion, privacy level
// `epsilon` and confidence-set radius `radius`.
//
// # Safety
// `phat` must be a live distribution handle and `out` must be writable.
enum RldpStatus rldp_solve(const struct RldpDistribution *phat,
                           uint32_t variant,
                           double epsilon,
                           double radius,
                           struct RldpMechanism **out);

// `P(y | s, u)`.
//
// # Safety
// `mech` must be a live mechanism handle and `out` must be writable.
enum RldpStatus rldp_mechanism_get(const struct RldpMechanism *mech,
                                   size_t s,
                                   size_t u,
                                   size_t y,
                                   double *out);

// Alphabet sizes of a mechanism.
//
// # Safety
// `mech` must be a live mechanism handle and the outputs writable.
enum RldpStatus rldp_mechanism_dims(const struct RldpMechanism *mech,
                                    size_t *s_size,
                                    size_t *u_size,
                                    size_t *y_size);

// JSON form of a mechanism; release it with [`rldp_string_free`].
//
// # Safety
// `mech` must be a live mechanism handle and `out` must be writable.
enum RldpStatus rldp_mechanism_to_json(const struct RldpMechanism *mech, char **out);

// # Safety
// `mech` must be null or a handle from this library not yet freed.
void rldp_mechanism_free(struct RldpMechanism *mech);

// Realized privacy leakage of `mech` under `dist`; may be `+inf`.
//
// # Safety
// Both handles must be live and `out` writable.
enum RldpStatus rldp_epsilon_star(const struct RldpDistribution *dist,
                                  const struct RldpMechanism *mech,
                                  double *out);

// Expected squared distortion of `mech` under `dist`.
//
// # Safety
// Both handles must be live and `out` writable.
enum RldpStatus rldp_distortion(const struct RldpDistribution *dist,
                                const struct RldpMechanism *mech,
                                double *out);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void rldp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RLDP_H */
