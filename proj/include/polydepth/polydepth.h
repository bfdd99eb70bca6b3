#ifndef POLYDEPTH_H
#define POLYDEPTH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PD_API __declspec(dllexport)
#else
#define PD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pd_status {
  PD_OK = 0,
  PD_INVALID_ARGUMENT = 1,
  PD_DIMENSION_MISMATCH = 2,
  PD_DOMAIN = 3,
  PD_NUMERIC = 4,
  PD_PARSE = 5,
  PD_IO = 6,
  PD_VERIFICATION_FAILED = 7,
  PD_INTERNAL = 99
} pd_status;

typedef struct pd_polynomial pd_polynomial;
typedef struct pd_network pd_network;

/* Message of the last failed call on this thread ("" after success). */
PD_API const char* pd_last_error(void);
PD_API const char* pd_status_name(pd_status status);
PD_API const char* pd_version(void);

/* Every char** result is heap memory owned by the caller. */
PD_API void pd_string_free(char* s);

/* Polynomials, e.g. "3*x1^2*x2 - x3 + 0.5". n = 0 infers the variable count. */
PD_API pd_status pd_polynomial_parse(const char* text, size_t n, pd_polynomial** out);
PD_API void pd_polynomial_free(pd_polynomial* p);
PD_API pd_status pd_polynomial_to_string(const pd_polynomial* p, char** out);
PD_API size_t pd_polynomial_variables(const pd_polynomial* p);
PD_API unsigned pd_polynomial_degree(const pd_polynomial* p);
PD_API pd_status pd_polynomial_evaluate(const pd_polynomial* p, const double* x, size_t n, double* out);

/* Networks */
typedef struct pd_network_info {
  size_t inputs;
  size_t depth; /* hidden layers */
  size_t neurons;
  size_t padding_neurons;
  size_t blocks;
} pd_network_info;

PD_API pd_status pd_network_from_json(const char* json, pd_network** out);
PD_API pd_status pd_network_to_json(const pd_network* net, char** out);
PD_API void pd_network_free(pd_network* net);
PD_API pd_status pd_network_info_get(const pd_network* net, pd_network_info* out);
PD_API pd_status pd_network_eval(const pd_network* net, const double* x, size_t n, double* out);
/* Taylor polynomial of degree <= cap about the origin, one term per line. */
PD_API pd_status pd_network_taylor(const pd_network* net, unsigned cap, char** out);

/* mode: "shallow", "deep", "tree" or "vandermonde"; activation: "exp",
 * "sigmoid", "tanh", "softplus". k is the tree depth (0 = rule of thumb). */
PD_API pd_status pd_construct(const pd_polynomial* target, const char* activation, const char* mode,
                              size_t k, pd_network** out);

/* Verification. Certificates are JSON documents. */
PD_API pd_status pd_certify_taylor(const pd_network* net, const pd_polynomial* target,
                                   double* max_deviation, char** certificate_json);
PD_API pd_status pd_sup_error(const pd_network* net, const pd_polynomial* target, double radius,
                              size_t samples, uint64_t seed, double* max_abs_error);
/* Rescaled network within epsilon of a homogeneous target on (-R, R)^n.
 * Returns PD_VERIFICATION_FAILED when epsilon cannot be certified. */
PD_API pd_status pd_epsilonize(const pd_network* net, const pd_polynomial* target, double epsilon,
                               double radius, size_t samples, uint64_t seed, pd_network** out,
                               char** certificate_json);
PD_API pd_status pd_derivative_rank(const pd_network* net, const uint32_t* r, size_t n,
                                    char** report_json);
PD_API pd_status pd_best_output_fit(const pd_network* net, const pd_polynomial* target,
                                    double* max_deviation);

/* Bounds and plans, returned as JSON (or CSV where noted). */
PD_API pd_status pd_monomial_bounds(const uint32_t* r, size_t n, size_t max_tree_k, char** json);
PD_API pd_status pd_sparse_bounds(const pd_polynomial* p, char** json);
PD_API pd_status pd_plan(double n, size_t k, char** json);
/* CSV with columns n,k,i,b_i,b_i_over_n^(1/k). n_grid: "log:A..B[:count]" or "a,b,c". */
PD_API pd_status pd_plan_sweep(const size_t* ks, size_t k_count, const char* n_grid, char** csv);
PD_API pd_status pd_tree_count(size_t n, const size_t* b, size_t k, uint64_t* out);
PD_API pd_status pd_asymptotic_width(double n, size_t k, double* out);
PD_API pd_status pd_depth_rule(double n, size_t width_cap, size_t* out);

/* Training */
typedef struct pd_train_config {
  size_t n;
  size_t depth;
  size_t width;
  const char* activation; /* "tanh" or "relu" */
  size_t steps;
  size_t batch_size;
  uint64_t seed;
  double rho;
  double eps;
  double input_low;
  double input_high;
  size_t eval_samples;
} pd_train_config;

typedef struct pd_train_result {
  double train_err;
  double test_err;
  double theory_width;
  double wallclock_s;
} pd_train_result;

PD_API void pd_train_config_default(pd_train_config* config);
/* history_csv (may be NULL) receives "step,train_err" rows. */
PD_API pd_status pd_train(const pd_train_config* config, pd_train_result* out, char** history_csv);
PD_API pd_status pd_gradient_check(const pd_train_config* config, double* max_relative_deviation);

typedef struct pd_grid_config {
  size_t n;
  const size_t* depths;
  size_t depth_count;
  const size_t* widths;
  size_t width_count;
  const uint64_t* seeds;
  size_t seed_count;
  const char* activation;
  size_t steps;
  size_t batch_size;
  size_t eval_samples;
  size_t threads;  /* 0: POLYDEPTH_THREADS or hardware concurrency */
  int allow_long;  /* required for n > 8 */
  int timing;      /* 0 writes wallclock_s as 0 */
} pd_grid_config;

typedef void (*pd_line_callback)(const char* line, void* user);

/* Calls on_row with each CSV row in grid order as soon as it is final. csv and
 * svg (either may be NULL) receive the full table and heat map. */
PD_API pd_status pd_experiment(const pd_grid_config* grid, pd_line_callback on_row, void* user,
                               char** csv, char** svg);

/* Acceptance criteria */
typedef struct pd_criterion {
  int id;
  const char* title;
  int passed;
  const char* detail;
  double seconds;
  const char* artifact;
} pd_criterion;

typedef void (*pd_criterion_callback)(const pd_criterion* result, void* user);

/* criteria = NULL or count = 0 runs all eight. */
PD_API pd_status pd_selftest(const int* criteria, size_t count, size_t threads,
                             pd_criterion_callback on_result, void* user, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif
