#ifndef ATOMIC_MIMO_H
#define ATOMIC_MIMO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `AMIMO_STATUS_OK` is zero.
typedef enum AmimoStatus {
  AMIMO_STATUS_OK = 0,
  AMIMO_STATUS_NULL_POINTER = 1,
  AMIMO_STATUS_DOMAIN = 2,
  AMIMO_STATUS_DIMENSION = 3,
  AMIMO_STATUS_SINGULAR = 4,
  AMIMO_STATUS_CONFIG = 5,
  AMIMO_STATUS_BUDGET = 6,
  AMIMO_STATUS_NUMERICAL = 7,
  AMIMO_STATUS_PARSE = 8,
  AMIMO_STATUS_PANIC = 9,
} AmimoStatus;

typedef enum AmimoDetector {
  AMIMO_DETECTOR_BIASED_GS = 0,
  AMIMO_DETECTOR_EM_GS = 1,
  AMIMO_DETECTOR_ZF_KNOWN = 2,
  AMIMO_DETECTOR_EXHAUSTIVE_LS = 3,
  AMIMO_DETECTOR_EXHAUSTIVE_ML = 4,
} AmimoDetector;

// Magnitude observation with its channel, reference and optional extras.
typedef struct AmimoProblem AmimoProblem;

// One random trial drawn by the simulator.
typedef struct AmimoScenario AmimoScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; never free it.
const char *amimo_last_error_message(void);

// Builds a problem from raw arrays. `sigma2 <= 0` or NaN means unknown;
// `order` may be 0 for the default 16-QAM.
//
// # Safety
// `a` must hold `2 K N` doubles, `b` `2 N` and `z` `N`; `out` must be
// writable.
enum AmimoStatus amimo_problem_new(size_t users,
                                   size_t antennas,
                                   const double *a,
                                   const double *b,
                                   const double *z,
                                   double sigma2,
                                   size_t order,
                                   struct AmimoProblem **out);

// Attaches the complex field `y` (`2 N` doubles) needed by the
// known-phase baseline.
//
// # Safety
// `problem` must come from this library; `y` must hold `2 N` doubles.
enum AmimoStatus amimo_problem_set_field(struct AmimoProblem *problem, const double *y);

// # Safety
// `problem` must be null or a live handle from this library.
void amimo_problem_free(struct AmimoProblem *problem);

// # Safety
// `problem` must be a live handle; `users` and `antennas` may be null.
enum AmimoStatus amimo_problem_dims(const struct AmimoProblem *problem,
                                    size_t *users,
                                    size_t *antennas);

// Draws trial `trial` of the normalised-channel simulator.
//
// # Safety
// `out` must be writable.
enum AmimoStatus amimo_scenario_new(size_t antennas,
                                    size_t users,
                                    size_t order,
                                    double snr_db,
                                    double rsr_db,
                                    uint64_t seed,
                                    uint64_t trial,
                                    struct AmimoScenario **out);

// Problem view of a scenario, including noise variance, true symbols and
// the complex field.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum AmimoStatus amimo_scenario_problem(const struct AmimoScenario *scenario,
                                        struct AmimoProblem **out);

// Copies the transmitted symbols (`2 K` doubles) and, if `sigma2` is not
// null, the noise variance.
//
// # Safety
// `scenario` must be a live handle; `symbols` must hold `len` doubles.
enum AmimoStatus amimo_scenario_truth(const struct AmimoScenario *scenario,
                                      double *symbols,
                                      size_t len,
                                      double *sigma2);

// # Safety
// `scenario` must be null or a live handle from this library.
void amimo_scenario_free(struct AmimoScenario *scenario);

// Runs one detector. `s_soft` receives `2 K` doubles, `indices` `K`
// constellation indices; `iterations` may be null. `t0 = 0` uses the
// default iteration count.
//
// # Safety
// `problem` must be a live handle and the output buffers large enough.
enum AmimoStatus amimo_detect(const struct AmimoProblem *problem,
                              enum AmimoDetector detector,
                              size_t t0,
                              double *s_soft,
                              size_t *indices,
                              size_t *iterations);

// `I1(x) / I0(x)` for `x >= 0`.
//
// # Safety
// `out` must be writable.
enum AmimoStatus amimo_bessel_ratio(double x, double *out);

// Normalised CRLB `Tr(I^-1) / K` at `s_true` (`2 K` doubles). Passing a
// null `s_true` uses the symbols stored in the problem, if any.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
enum AmimoStatus amimo_normalized_crlb(const struct AmimoProblem *problem,
                                       const double *s_true,
                                       double *out);

// Library version as a static NUL-terminated string.
const char *amimo_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATOMIC_MIMO_H */
