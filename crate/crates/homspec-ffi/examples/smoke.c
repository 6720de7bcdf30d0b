#include "homspec.h"
#include <stdio.h>
#include <string.h>

static const char *CONFIG =
    "[problem]\n"
    "dimension = 1\n"
    "alpha = \"1/3\"\n"
    "beta = 1.0\n"
    "domain_lower = [-1.0]\n"
    "domain_upper = [1.0]\n"
    "[coefficients]\n"
    "c = \"4 + 8*x1^2 + 0.5*sin(2*pi*y1)^2\"\n"
    "[coefficients.a]\n"
    "\"1111\" = \"0.01*(2 + sin(2*pi*y1))\"\n"
    "[coefficients.b]\n"
    "\"11\" = \"0.5*(2 + sin(2*pi*y1))\"\n";

int main(void) {
  HomspecProblem *h = NULL;
  if (homspec_problem_new(CONFIG, &h) != HOMSPEC_OK) {
    fprintf(stderr, "new failed: %s\n", homspec_last_error());
    return 1;
  }
  char *json = NULL;
  if (homspec_classify(h, &json) != HOMSPEC_OK) {
    fprintf(stderr, "classify failed: %s\n", homspec_last_error());
    return 1;
  }
  if (strstr(json, "\"R2\"") == NULL) {
    fprintf(stderr, "unexpected report: %s\n", json);
    return 1;
  }
  printf("classify ok: %s\n", json);
  homspec_string_free(json);
  json = NULL;
  if (homspec_effective(h, &json) != HOMSPEC_OK) {
    fprintf(stderr, "effective failed: %s\n", homspec_last_error());
    return 1;
  }
  if (strstr(json, "\"c0\":4.25") == NULL) {
    fprintf(stderr, "unexpected effective report: %s\n", json);
    return 1;
  }
  printf("effective ok\n");
  homspec_string_free(json);
  homspec_problem_free(h);
  return 0;
}
