#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "polydepth/polydepth.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

int main(void) {
  EXPECT(strcmp(pd_version(), "1.0.0") == 0);
  EXPECT(strcmp(pd_status_name(PD_OK), "ok") == 0);

  pd_polynomial* p = NULL;
  EXPECT(pd_polynomial_parse("x1*x2*x3", 0, &p) == PD_OK);
  EXPECT(pd_polynomial_variables(p) == 3);
  EXPECT(pd_polynomial_degree(p) == 3);

  pd_polynomial* bad = NULL;
  EXPECT(pd_polynomial_parse("x1 +", 0, &bad) == PD_PARSE);
  EXPECT(bad == NULL);
  EXPECT(strlen(pd_last_error()) > 0);
  EXPECT(pd_polynomial_parse(NULL, 0, &bad) == PD_INVALID_ARGUMENT);

  pd_network* net = NULL;
  EXPECT(pd_construct(p, "exp", "shallow", 0, &net) == PD_OK);
  pd_network_info info;
  EXPECT(pd_network_info_get(net, &info) == PD_OK);
  EXPECT(info.inputs == 3);
  EXPECT(info.neurons == 8);
  EXPECT(info.depth == 1);

  double dev = 1.0;
  char* cert = NULL;
  EXPECT(pd_certify_taylor(net, p, &dev, &cert) == PD_OK);
  EXPECT(dev < 1e-9);
  EXPECT(cert && strstr(cert, "taylor") != NULL);
  pd_string_free(cert);

  const double x[] = {0.01, 0.02, 0.03};
  double y = 0;
  EXPECT(pd_network_eval(net, x, 3, &y) == PD_OK);
  /* remainder starts at degree 5 */
  EXPECT(fabs(y - 6e-6) < 1e-8);
  EXPECT(pd_network_eval(net, x, 2, &y) == PD_DIMENSION_MISMATCH);

  char* json = NULL;
  EXPECT(pd_network_to_json(net, &json) == PD_OK);
  pd_network* back = NULL;
  EXPECT(pd_network_from_json(json, &back) == PD_OK);
  double y2 = 0;
  EXPECT(pd_network_eval(back, x, 3, &y2) == PD_OK);
  EXPECT(y == y2);
  pd_string_free(json);
  EXPECT(pd_network_from_json("{", &back) == PD_PARSE || pd_network_from_json("{", &back) == PD_INVALID_ARGUMENT);

  pd_network* scaled = NULL;
  char* ecert = NULL;
  EXPECT(pd_epsilonize(net, p, 1e-3, 1.0, 10000, 0, &scaled, &ecert) == PD_OK);
  double sup = 1;
  EXPECT(pd_sup_error(scaled, p, 1.0, 10000, 3, &sup) == PD_OK);
  EXPECT(sup < 1e-3);
  pd_string_free(ecert);
  pd_network_free(scaled);

  const uint32_t r[] = {1, 1, 1};
  char* rank = NULL;
  EXPECT(pd_derivative_rank(net, r, 3, &rank) == PD_OK);
  EXPECT(strstr(rank, "\"full_row_rank\":true") || strstr(rank, "\"full_row_rank\": true"));
  pd_string_free(rank);

  char* bounds = NULL;
  const uint32_t ones[] = {1, 1, 1, 1, 1};
  EXPECT(pd_monomial_bounds(ones, 5, 3, &bounds) == PD_OK);
  EXPECT(strstr(bounds, "\"shallow_exact\"") != NULL);
  pd_string_free(bounds);

  uint64_t count = 0;
  const size_t b44[] = {4, 4};
  EXPECT(pd_tree_count(16, b44, 2, &count) == PD_OK);
  EXPECT(count == 80);
  double w = 0;
  EXPECT(pd_asymptotic_width(20, 1, &w) == PD_OK);
  EXPECT(w == 1048576.0);
  size_t k = 0;
  EXPECT(pd_depth_rule(1000, 1024, &k) == PD_OK);
  EXPECT(k == 3);

  char* plan = NULL;
  EXPECT(pd_plan(64, 2, &plan) == PD_OK);
  EXPECT(strstr(plan, "\"b\"") != NULL);
  pd_string_free(plan);
  EXPECT(pd_plan(64, 0, &plan) == PD_INVALID_ARGUMENT);

  pd_train_config tc;
  pd_train_config_default(&tc);
  tc.n = 2;
  tc.width = 4;
  tc.steps = 200;
  tc.eval_samples = 1000;
  pd_train_result tr;
  EXPECT(pd_train(&tc, &tr, NULL) == PD_OK);
  EXPECT(isfinite(tr.test_err));
  double gc = 1;
  EXPECT(pd_gradient_check(&tc, &gc) == PD_OK);
  EXPECT(gc < 1e-5);
  tc.activation = "sigmoid";
  EXPECT(pd_train(&tc, &tr, NULL) == PD_INVALID_ARGUMENT);

  const size_t depths[] = {1, 2}, widths[] = {4};
  const uint64_t seeds[] = {0};
  pd_grid_config g = {2, depths, 2, widths, 1, seeds, 1, "tanh", 100, 32, 500, 1, 0, 0};
  int rows = 0;
  char* csv = NULL;
  EXPECT(pd_experiment(&g, count_lines, &rows, &csv, NULL) == PD_OK);
  EXPECT(rows == 2);
  EXPECT(csv && strncmp(csv, "n,depth,width", 13) == 0);
  pd_string_free(csv);

  pd_network_free(back);
  pd_network_free(net);
  pd_polynomial_free(p);
  pd_network_free(NULL);
  pd_polynomial_free(NULL);
  pd_string_free(NULL);

  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi ok\n");
  return 0;
}
