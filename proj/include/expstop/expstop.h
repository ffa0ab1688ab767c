#ifndef EXPSTOP_H
#define EXPSTOP_H

/*
 * C interface to the expstop library: entropy-regularized entry/exit stopping
 * under an Ornstein-Uhlenbeck signal.
 *
 * Functions returning expstop_status leave a message for expstop_last_error()
 * on failure (thread-local, valid until the next failing call on that thread).
 * Strings handed out through char** must be released with expstop_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(EXPSTOP_BUILDING_LIBRARY)
#define EXPSTOP_API __attribute__((visibility("default")))
#else
#define EXPSTOP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum expstop_status {
    EXPSTOP_OK = 0,
    EXPSTOP_VALIDATION = 1, /* invalid parameters or a failed check */
    EXPSTOP_NUMERICAL = 2,  /* non-convergence, lost diagonal dominance, divergence */
    EXPSTOP_CONFIG = 3      /* malformed config, unknown key, I/O failure */
} expstop_status;

typedef struct expstop_config expstop_config;
typedef struct expstop_field expstop_field;

EXPSTOP_API const char* expstop_version(void);
EXPSTOP_API const char* expstop_last_error(void);
EXPSTOP_API void expstop_string_free(char* s);

/* Configuration */
EXPSTOP_API expstop_status expstop_config_default(expstop_config** out);
EXPSTOP_API expstop_status expstop_config_parse(const char* json, expstop_config** out);
EXPSTOP_API expstop_status expstop_config_load(const char* path, expstop_config** out);
/* "dotted.key=value"; the value is read as JSON, else as a string. */
EXPSTOP_API expstop_status expstop_config_set(expstop_config* config, const char* assignment);
EXPSTOP_API expstop_status expstop_config_to_json(const expstop_config* config, char** out);
EXPSTOP_API void expstop_config_free(expstop_config* config);

/* Experiments: solve, sweep, validate, train, compare, simulate.
 * Writes under the config's output_dir; *summary (optional) receives a JSON object. */
EXPSTOP_API expstop_status expstop_run(const char* command, const expstop_config* config, char** summary);

/* Value field */
/* On EXPSTOP_NUMERICAL (no convergence) *out still holds the field and must be freed. */
EXPSTOP_API expstop_status expstop_solve(const expstop_config* config, expstop_field** out);
EXPSTOP_API int expstop_field_converged(const expstop_field* field);
EXPSTOP_API size_t expstop_field_size_p(const expstop_field* field);
EXPSTOP_API size_t expstop_field_size_b(const expstop_field* field);
/* Copies min(n, size) values; returns the number copied. */
EXPSTOP_API size_t expstop_field_v0(const expstop_field* field, double* out, size_t n);
EXPSTOP_API size_t expstop_field_v1(const expstop_field* field, double* out, size_t n);
EXPSTOP_API double expstop_field_v0_at(const expstop_field* field, double p);
EXPSTOP_API double expstop_field_v1_at(const expstop_field* field, double p, double b);
/* Entry boundary; returns 0 and leaves *p_dagger untouched when there is no crossing. */
EXPSTOP_API int expstop_field_entry_boundary(const expstop_field* field, double* p_dagger);
EXPSTOP_API void expstop_field_free(expstop_field* field);

/* Closed-form policy math (NaN on invalid input) */
EXPSTOP_API double expstop_source_f(double y);
EXPSTOP_API double expstop_mean_intensity(double delta, double eta, double cap_m);
EXPSTOP_API double expstop_entropy_cost(double delta, double eta, double cap_m);
EXPSTOP_API double expstop_stage_probability(double mean_lambda, double dt);
EXPSTOP_API double expstop_gibbs_pdf(double lambda, double delta, double eta, double cap_m);

/* Model */
EXPSTOP_API double expstop_payoff(const expstop_config* config, double p, double b);
EXPSTOP_API expstop_status expstop_ou_moments(const expstop_config* config, double p0, double t, double* mean,
                                              double* variance);

#ifdef __cplusplus
}
#endif

#endif
