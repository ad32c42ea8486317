#ifndef TRADING_PROPHETS_H
#define TRADING_PROPHETS_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from trading-prophets-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_ARGUMENT = 2,
  TP_STATUS_ZERO_PROBABILITY = 3,
  TP_STATUS_DISCONTINUOUS_CDF = 4,
  TP_STATUS_HORIZON_TOO_LARGE = 5,
  TP_STATUS_PROTOCOL_VIOLATION = 6,
  TP_STATUS_BOUND_VIOLATED = 7,
  TP_STATUS_INTERNAL_ERROR = 8,
} TpStatus;

// An owned price distribution (atoms plus perturbation half-width).
typedef struct TpDistribution TpDistribution;

// An owned price process.
typedef struct TpProcess TpProcess;

// Buy/sell thresholds and the derived quantities, by value.
typedef struct TpThresholds {
  double z_l;
  double z_h;
  double v;
  double p;
  double v_l;
  double v_h;
  double median;
} TpThresholds;

// Summary of a Monte Carlo batch, by value.
typedef struct TpBatchStats {
  uint64_t trials;
  double alg_mean;
  double alg_se;
  double opt_mean;
  double opt_se;
  double ratio;
  double ratio_se;
} TpBatchStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. Never null;
// empty when no failure has occurred.
const char *tp_last_error_message(void);

// Builds a distribution from parallel `values`/`probs` arrays of length
// `len` and perturbation half-width `delta`.
//
// # Safety
// `values` and `probs` must point to `len` readable doubles; `out` must be
// a valid location for one pointer.
enum TpStatus tp_distribution_new(const double *values,
                                  const double *probs,
                                  size_t len,
                                  double delta,
                                  struct TpDistribution **out);

// The uniform distribution on [0, 1].
//
// # Safety
// `out` must be a valid location for one pointer.
enum TpStatus tp_distribution_uniform01(struct TpDistribution **out);

// Releases a distribution handle. Null is ignored.
//
// # Safety
// `d` must be a pointer previously returned by a constructor, or null.
void tp_distribution_free(struct TpDistribution *d);

// E[X].
//
// # Safety
// `d` must be a live distribution handle; `out` must be writable.
enum TpStatus tp_distribution_mean(const struct TpDistribution *d, double *out);

// E[(X_cur - X_prev)_+] for independent draws.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum TpStatus tp_pair_gap(const struct TpDistribution *prev,
                          const struct TpDistribution *cur,
                          double *out);

// Solves the buy/sell thresholds for a distribution under a cost model.
//
// # Safety
// `d` must be a live distribution handle; `out` must be writable.
enum TpStatus tp_thresholds_solve(const struct TpDistribution *d,
                                  double eps_pi,
                                  double eps_sigma,
                                  struct TpThresholds *out);

// Zero-cost offline optimum of a realized price path (telescoping sum).
//
// # Safety
// `prices` must point to `len` readable doubles; `out` must be writable.
enum TpStatus tp_opt_telescoping(const double *prices, size_t len, double *out);

// Offline optimum of a realized price path under transaction costs.
//
// # Safety
// `prices` must point to `len` readable doubles; `out` must be writable.
enum TpStatus tp_opt_with_costs(const double *prices,
                                size_t len,
                                double eps_pi,
                                double eps_sigma,
                                bool initial_stock,
                                double *out);

// I.i.d. process over `horizon` steps (the distribution is copied).
//
// # Safety
// `d` must be a live distribution handle; `out` must be writable.
enum TpStatus tp_process_iid(const struct TpDistribution *d,
                             size_t horizon,
                             struct TpProcess **out);

// Independent per-step distributions (each handle is copied).
//
// # Safety
// `dists` must point to `len` live distribution handles; `out` writable.
enum TpStatus tp_process_independent(const struct TpDistribution *const *dists,
                                     size_t len,
                                     struct TpProcess **out);

// Fixed deterministic price path.
//
// # Safety
// `prices` must point to `len` readable doubles; `out` must be writable.
enum TpStatus tp_process_deterministic(const double *prices, size_t len, struct TpProcess **out);

// The alternating two-distribution family whose prophet/online gap
// approaches 3. `horizon` must be even.
//
// # Safety
// `out` must be writable.
enum TpStatus tp_process_prop_adversarial(double eps, size_t horizon, struct TpProcess **out);

// The i.i.d. three-atom family whose gap approaches 2.
//
// # Safety
// `out` must be writable.
enum TpStatus tp_process_prop_iid(double eps, size_t horizon, struct TpProcess **out);

// The i.i.d. distribution on which the margin trader never buys.
//
// # Safety
// `out` must be writable.
enum TpStatus tp_process_appendix_failure(double eps, size_t horizon, struct TpProcess **out);

// The adaptive phase adversary (additive cost `eps`, `phases` phases,
// lookahead window `k`).
//
// # Safety
// `out` must be writable.
enum TpStatus tp_process_phase(double eps, size_t phases, size_t k, struct TpProcess **out);

// Releases a process handle. Null is ignored.
//
// # Safety
// `p` must be a pointer previously returned by a constructor, or null.
void tp_process_free(struct TpProcess *p);

// Closed-form zero-cost E[OPT] of the process.
//
// # Safety
// `p` must be a live process handle; `out` must be writable.
enum TpStatus tp_expected_opt_zero_cost(const struct TpProcess *p, double *out);

// Closed-form zero-cost expected profit of the buy-low-sell-high rule
// (equivalently, the best-online upper bound).
//
// # Safety
// `p` must be a live process handle; `out` must be writable.
enum TpStatus tp_expected_alg_blsh(const struct TpProcess *p, double *out);

// Runs a reproducible Monte Carlo batch of `trader_name` ("blsh", "bbsa",
// "eps-margin", "lookahead:1") against the process. `margin` is read only
// by "eps-margin".
//
// # Safety
// `p` must be a live process handle, `trader_name` a NUL-terminated string,
// and `out` writable.
enum TpStatus tp_monte_carlo(const struct TpProcess *p,
                             const char *trader_name,
                             double margin,
                             double eps_pi,
                             double eps_sigma,
                             size_t trials,
                             uint64_t master_seed,
                             struct TpBatchStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRADING_PROPHETS_H */
