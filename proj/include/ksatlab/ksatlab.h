/*
 * C interface to ksatlab: random K-SAT generation, reference solvers,
 * assignment verification and phase-transition sweeps.
 *
 * Conventions
 *   - Every fallible call returns ksat_status; KSAT_OK is zero.
 *   - On failure ksat_last_error() describes the most recent error raised
 *     on the calling thread. The pointer stays valid until the next call
 *     on that thread.
 *   - Objects returned through out-parameters are owned by the caller and
 *     released with the matching *_free function. Strings are released
 *     with ksat_string_free.
 *   - Assignments cross the boundary as NUL-terminated strings over {0,1};
 *     character i is the value of variable i+1.
 */
#ifndef KSATLAB_H
#define KSATLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(KSATLAB_BUILDING)
#define KSAT_API __declspec(dllexport)
#else
#define KSAT_API __declspec(dllimport)
#endif
#else
#define KSAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ksat_status {
  KSAT_OK = 0,
  KSAT_ERR_INVALID_ARGUMENT = 1,
  KSAT_ERR_PARSE = 2,
  KSAT_ERR_IO = 3,
  KSAT_ERR_UNDEFINED_INPUT = 4,
  KSAT_ERR_TRANSPORT = 5,
  KSAT_ERR_AUTHENTICATION = 6,
  KSAT_ERR_SCHEMA = 7,
  KSAT_ERR_INTERNAL = 8
} ksat_status;

typedef enum ksat_verdict {
  KSAT_VERDICT_SAT = 0,
  KSAT_VERDICT_UNSAT = 1,
  KSAT_VERDICT_UNKNOWN = 2
} ksat_verdict;

typedef enum ksat_solver {
  KSAT_SOLVER_DPLL = 0,
  KSAT_SOLVER_WALKSAT = 1,
  KSAT_SOLVER_BRUTE = 2,
  KSAT_SOLVER_RANDOM = 3
} ksat_solver;

typedef struct ksat_instance ksat_instance;
typedef struct ksat_result ksat_result;

KSAT_API const char *ksat_version(void);
KSAT_API const char *ksat_last_error(void);
KSAT_API const char *ksat_status_name(ksat_status status);
KSAT_API void ksat_string_free(char *text);

/* Instances ---------------------------------------------------------------- */

KSAT_API ksat_status ksat_instance_parse(const char *text, size_t length,
                                         ksat_instance **out);
KSAT_API ksat_status ksat_instance_load(const char *path, ksat_instance **out);
KSAT_API ksat_status ksat_instance_generate(int32_t k, int32_t n_vars, double alpha,
                                            uint64_t seed, ksat_instance **out);
KSAT_API void ksat_instance_free(ksat_instance *instance);

KSAT_API int32_t ksat_instance_num_vars(const ksat_instance *instance);
KSAT_API size_t ksat_instance_num_clauses(const ksat_instance *instance);
/* Common clause width, 0 when widths differ or there are no clauses. */
KSAT_API int32_t ksat_instance_k(const ksat_instance *instance);
/* Returns 0 and leaves *seed untouched when no seed comment is present. */
KSAT_API int ksat_instance_seed(const ksat_instance *instance, uint64_t *seed);
KSAT_API ksat_status ksat_instance_to_dimacs(const ksat_instance *instance,
                                             char **out);

/* Verification -------------------------------------------------------------- */

KSAT_API ksat_status ksat_count_unsatisfied(const ksat_instance *instance,
                                            const char *bits, size_t *count);

/* Solving ------------------------------------------------------------------- */

typedef struct ksat_solve_options {
  ksat_solver solver;
  uint64_t budget;    /* DPLL decisions; 0 = library default */
  double noise;       /* WalkSAT random-walk probability */
  uint64_t max_flips; /* WalkSAT flips per try; 0 = 100 * N * ceil(alpha) */
  uint64_t max_tries; /* WalkSAT restarts */
  uint64_t seed;      /* WalkSAT and random oracle */
} ksat_solve_options;

KSAT_API void ksat_solve_options_init(ksat_solve_options *options);

/*
 * The random oracle yields SAT when its guess satisfies the instance and
 * UNKNOWN otherwise; its guess is available either way.
 */
KSAT_API ksat_status ksat_solve(const ksat_instance *instance,
                                const ksat_solve_options *options,
                                ksat_result **out);
KSAT_API void ksat_result_free(ksat_result *result);
KSAT_API ksat_verdict ksat_result_verdict(const ksat_result *result);
/* Borrowed; NULL when the solver produced no assignment. */
KSAT_API const char *ksat_result_assignment(const ksat_result *result);
KSAT_API uint64_t ksat_result_decisions(const ksat_result *result);
KSAT_API uint64_t ksat_result_flips(const ksat_result *result);
KSAT_API double ksat_result_seconds(const ksat_result *result);

/* Suites -------------------------------------------------------------------- */

typedef struct ksat_gen_options {
  int32_t k;
  int32_t n_vars;
  double alpha_from;
  double alpha_to;
  double alpha_step;
  size_t samples;
  uint64_t seed;
} ksat_gen_options;

KSAT_API ksat_status ksat_generate_suite(const ksat_gen_options *options,
                                         const char *out_dir, size_t *files_written);

/* Sweeps -------------------------------------------------------------------- */

typedef struct ksat_sweep_options {
  const char *oracle;            /* dpll | walksat | random | model | replay */
  const char *model_config_path; /* optional JSON document */
  const char *replay_dir;        /* required for replay */
  unsigned jobs;                 /* local oracles only; 0 = 1 */
  uint64_t seed;                 /* walksat and random */
  uint64_t dpll_budget;          /* 0 = library default */
  int baseline;                  /* non-zero: add a DPLL reference series */
  int spend_money_acknowledged;  /* must be non-zero for the model oracle */
} ksat_sweep_options;

typedef struct ksat_sweep_summary {
  size_t suites;
  size_t records;
  size_t points;
  int stopped;             /* non-zero when an all-refusal point ended a sweep */
  double stopped_at_alpha; /* last such alpha when stopped */
} ksat_sweep_summary;

KSAT_API void ksat_sweep_options_init(ksat_sweep_options *options);

/*
 * Runs a sweep over every suite below suite_dir and writes records.csv,
 * points.csv, results.json, plots and (model/replay) transcripts/ to out_dir.
 * A failure part-way still writes what was gathered and then returns the
 * failure status.
 */
KSAT_API ksat_status ksat_run_sweep(const char *suite_dir,
                                    const ksat_sweep_options *options,
                                    const char *out_dir, ksat_sweep_summary *summary);

/* Re-aggregates a sweep output directory and writes tables and plots. */
KSAT_API ksat_status ksat_report(const char *in_dir, const char *out_dir,
                                 size_t *files_written);

#ifdef __cplusplus
}
#endif

#endif /* KSATLAB_H */
