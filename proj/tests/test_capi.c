#include <math.h>
#include <stdio.h>
#include <string.h>

#include "corona_lab/corona_lab.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void status_names(void) {
  EXPECT(strlen(clab_status_name(CLAB_OK)) > 0);
  EXPECT(strcmp(clab_status_name(CLAB_ERR_CONFIG), clab_status_name(CLAB_ERR_PARAMETER)) != 0);
  EXPECT(strlen(clab_version()) > 0);
}

static void null_arguments(void) {
  clab_weight* w = NULL;
  double v = 0.0;
  EXPECT(clab_weight_create(NULL, &w) == CLAB_ERR_NULL_ARGUMENT);
  EXPECT(clab_weight_create("{}", NULL) == CLAB_ERR_NULL_ARGUMENT);
  EXPECT(clab_weight_a2(NULL, 0, &v) == CLAB_ERR_NULL_ARGUMENT);
  EXPECT(strlen(clab_last_error()) > 0);
  EXPECT(clab_run(NULL, "{}", NULL) == CLAB_ERR_NULL_ARGUMENT);
  clab_weight_free(NULL);
  clab_operator_free(NULL);
  clab_lattice_pair_free(NULL);
  clab_report_free(NULL);
}

static void weights(void) {
  clab_weight* w = NULL;
  EXPECT(clab_weight_create("{\"kind\":\"step\",\"dim\":1,\"level\":1,\"params\":{\"c\":4.0}}", &w) == CLAB_OK);
  EXPECT(strlen(clab_last_error()) == 0);
  int64_t cells = 0;
  EXPECT(clab_weight_size(w, &cells) == CLAB_OK && cells == 2);
  double values[2] = {0.0, 0.0};
  EXPECT(clab_weight_values(w, values, 2) == CLAB_OK);
  EXPECT(values[0] == 4.0 && values[1] == 0.25);
  double a2 = 0.0, a1 = 0.0;
  EXPECT(clab_weight_a2(w, 0, &a2) == CLAB_OK);
  EXPECT(fabs(a2 - 289.0 / 64.0) <= 1e-14);
  EXPECT(clab_weight_a1(w, 0, &a1) == CLAB_OK);
  EXPECT(fabs(a1 - 17.0 / 2.0) <= 1e-14);
  clab_weight_free(w);

  w = NULL;
  EXPECT(clab_weight_create("{\"kind\":\"bogus\"}", &w) != CLAB_OK);
  EXPECT(w == NULL);
  EXPECT(clab_weight_create("{\"kind\":\"power\",\"params\":{\"alpha\":1.5}}", &w) != CLAB_OK);
  EXPECT(clab_weight_create("not json", &w) == CLAB_ERR_CONFIG);
}

static void operators(void) {
  clab_weight* one = NULL;
  clab_operator* h = NULL;
  clab_operator* z = NULL;
  EXPECT(clab_weight_create("{\"kind\":\"constant\",\"dim\":1,\"level\":6}", &one) == CLAB_OK);
  EXPECT(clab_operator_create("hilbert", 1, 6, &h) == CLAB_OK);
  EXPECT(clab_operator_create("zero", 1, 6, &z) == CLAB_OK);
  double n = 0.0, k = 0.0;
  EXPECT(clab_operator_strong_norm(h, one, &n) == CLAB_OK);
  EXPECT(n >= 2.8 && n <= 3.14159265358979323846);
  EXPECT(clab_operator_test_constant(h, one, &k) == CLAB_OK);
  EXPECT(k > 0.0 && k <= n * n * (1.0 + 1e-9));
  EXPECT(clab_operator_strong_norm(z, one, &n) == CLAB_OK && n == 0.0);

  clab_operator* bad = NULL;
  EXPECT(clab_operator_create("nope", 1, 6, &bad) != CLAB_OK);
  EXPECT(bad == NULL);

  clab_weight* other = NULL;
  EXPECT(clab_weight_create("{\"kind\":\"constant\",\"dim\":1,\"level\":4}", &other) == CLAB_OK);
  EXPECT(clab_operator_strong_norm(h, other, &n) != CLAB_OK);
  clab_weight_free(other);
  clab_operator_free(h);
  clab_operator_free(z);
  clab_weight_free(one);
}

static void lattices(void) {
  clab_lattice_pair* p = NULL;
  EXPECT(clab_lattice_pair_sample(5, 1, 1.0, 2, 6, &p) == CLAB_OK);
  for (int which = 0; which < 2; ++which) {
    int64_t shift[3] = {99, 99, 99};
    EXPECT(clab_lattice_pair_shift(p, which, shift) == CLAB_OK);
    EXPECT(shift[0] >= -16 && shift[0] <= 16);
  }
  /* Essentially bad implies bad. */
  for (int level = 0; level <= 6; ++level) {
    for (int64_t i = 0; i < (1 << level); ++i) {
      int64_t index[3] = {i, 0, 0};
      int bad = -1, ess = -1;
      EXPECT(clab_cube_badness(p, 0, level, index, &bad, &ess) == CLAB_OK);
      EXPECT(!ess || bad);
    }
  }
  int bad = 0, ess = 0;
  int64_t index[3] = {0, 0, 0};
  EXPECT(clab_cube_badness(p, 2, 1, index, &bad, &ess) != CLAB_OK);
  EXPECT(clab_cube_badness(p, 0, 9, index, &bad, &ess) != CLAB_OK);
  clab_lattice_pair_free(p);

  /* Same seed, same shifts. */
  clab_lattice_pair* a = NULL;
  clab_lattice_pair* b = NULL;
  EXPECT(clab_lattice_pair_sample(77, 1, 1.0, 2, 6, &a) == CLAB_OK);
  EXPECT(clab_lattice_pair_sample(77, 1, 1.0, 2, 6, &b) == CLAB_OK);
  int64_t sa[3], sb[3];
  clab_lattice_pair_shift(a, 1, sa);
  clab_lattice_pair_shift(b, 1, sb);
  EXPECT(sa[0] == sb[0]);
  clab_lattice_pair_free(a);
  clab_lattice_pair_free(b);
  EXPECT(clab_lattice_pair_sample(1, 1, 0.0, 2, 6, &a) != CLAB_OK);
}

static void runs(void) {
  clab_report* r = NULL;
  EXPECT(clab_run("weight", "{\"level\":3}", &r) == CLAB_OK);
  EXPECT(strcmp(clab_report_format(r), "json") == 0);
  EXPECT(strstr(clab_report_output(r), "\"schema\": \"corona-lab/1\"") != NULL);
  EXPECT(strstr(clab_report_config(r), "\"command\":\"weight\"") != NULL);
  EXPECT(clab_report_failed_count(r) == 0);
  EXPECT(strcmp(clab_report_failed_name(r, 0), "") == 0);
  clab_report_free(r);

  r = NULL;
  EXPECT(clab_run("weight", "{\"format\":\"csv\"}", &r) == CLAB_ERR_CONFIG);
  EXPECT(r == NULL);
  EXPECT(clab_run("frobnicate", "{}", &r) == CLAB_ERR_CONFIG);
  EXPECT(strstr(clab_last_error(), "frobnicate") != NULL);

  EXPECT(clab_run("sweep", "{\"level\":3,\"steps\":2,\"format\":\"csv\"}", &r) == CLAB_OK);
  EXPECT(strcmp(clab_report_format(r), "csv") == 0);
  EXPECT(strncmp(clab_report_output(r), "alpha,a2,", 9) == 0);
  clab_report_free(r);
}

int main(void) {
  status_names();
  null_arguments();
  weights();
  operators();
  lattices();
  runs();
  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
