#ifndef LOADBENCH_H
#define LOADBENCH_H

/* C interface to the loadbench engine. Every function returns an lb_status;
 * on failure lb_last_error() describes the problem (per thread). Handles are
 * opaque and owned by the caller until passed to the matching destroy call. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LB_API __declspec(dllexport)
#else
#define LB_API __attribute__((visibility("default")))
#endif

typedef enum lb_status {
  LB_OK = 0,
  LB_ERR_USAGE = 1,    /* bad arguments or configuration */
  LB_ERR_DATA = 2,     /* malformed or unusable input data */
  LB_ERR_INTERNAL = 3  /* bug or resource failure */
} lb_status;

typedef struct lb_config lb_config;
typedef struct lb_vocab lb_vocab;
typedef struct lb_boxcox lb_boxcox;
typedef struct lb_index lb_index;

LB_API const char* lb_version(void);
/* Message of the last failed call on this thread; "" when none. */
LB_API const char* lb_last_error(void);

/* Key-value configuration. */
LB_API lb_status lb_config_create(lb_config** out);
LB_API void lb_config_destroy(lb_config* config);
LB_API lb_status lb_config_load(lb_config* config, const char* path);
LB_API lb_status lb_config_set(lb_config* config, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf when it fits; *needed receives
 * the length including the terminator. Missing key -> LB_ERR_USAGE. */
LB_API lb_status lb_config_get(const lb_config* config, const char* key, char* buf, size_t cap,
                               size_t* needed);

/* Runs a subcommand (synth, ingest, index, tokenize, fit-boxcox,
 * eval-zero-shot, eval-transfer, score-file, compare, report). *summary, when
 * non-null, points to a thread-local text valid until the next call. */
LB_API lb_status lb_run(const char* command, const lb_config* config, const char** summary);

/* Scores. */
LB_API lb_status lb_gaussian_crps(double y, double mu, double sigma, double* out);
LB_API lb_status lb_nrmse(const double* actual, const double* pred, size_t n, double* out);
LB_API lb_status lb_nmae(const double* actual, const double* pred, size_t n, double* out);
LB_API lb_status lb_nmbe(const double* actual, const double* pred, size_t n, double* out);
/* Percentage of i with x[i] < y[i]. */
LB_API lb_status lb_probability_of_improvement(const double* x, const double* y, size_t n,
                                               double* out);

/* Persistence baselines over a 168-value context; outputs have 24 values. */
LB_API lb_status lb_previous_day(const double* context, double* out);
LB_API lb_status lb_previous_week(const double* context, double* out);
LB_API lb_status lb_persistence_ensemble(const double* context, double* mu, double* sigma);

/* Load tokenizer. */
LB_API lb_status lb_vocab_fit(const double* samples, size_t n, size_t k, double tau, uint64_t seed,
                              lb_vocab** out);
LB_API lb_status lb_vocab_load(const char* path, lb_vocab** out);
LB_API lb_status lb_vocab_save(const lb_vocab* vocab, const char* path);
LB_API void lb_vocab_destroy(lb_vocab* vocab);
LB_API size_t lb_vocab_size(const lb_vocab* vocab);
LB_API lb_status lb_vocab_encode(const lb_vocab* vocab, double x, size_t* token);
LB_API lb_status lb_vocab_decode(const lb_vocab* vocab, size_t token, double* x);
LB_API lb_status lb_categorical_rps(const lb_vocab* vocab, size_t y_token, const double* mass,
                                    size_t n, double* out);

/* Box-Cox transform. */
LB_API lb_status lb_boxcox_fit(const double* samples, size_t n, lb_boxcox** out);
LB_API lb_status lb_boxcox_create(double lambda, double shift, lb_boxcox** out);
LB_API void lb_boxcox_destroy(lb_boxcox* boxcox);
LB_API double lb_boxcox_lambda(const lb_boxcox* boxcox);
LB_API double lb_boxcox_shift(const lb_boxcox* boxcox);
LB_API lb_status lb_boxcox_forward(const lb_boxcox* boxcox, double x, double* out);
LB_API lb_status lb_boxcox_inverse(const lb_boxcox* boxcox, double y, double* out);
/* Gaussian in transformed space -> (mu, sigma) in kWh; *low_confidence is
 * set when the back-projection had to be clamped. */
LB_API lb_status lb_boxcox_backproject(const lb_boxcox* boxcox, double mu, double sigma,
                                       double* mu_out, double* sigma_out, int* low_confidence);

/* Window index. */
LB_API lb_status lb_index_open(const char* path, lb_index** out);
LB_API void lb_index_close(lb_index* index);
LB_API size_t lb_index_size(const lb_index* index);
/* context receives 168 values, target 24; *building_id (optional) points to a
 * thread-local string valid until the next call. */
LB_API lb_status lb_index_fetch(const lb_index* index, size_t n, double* context, double* target,
                                const char** building_id);

#ifdef __cplusplus
}
#endif

#endif
