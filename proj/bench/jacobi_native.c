/* Hand-written native reference for bench/jacobi.py.
   Usage: jacobi_native NX ITERS. Prints the final residual on stdout and
   the compute-loop wall time in seconds on stderr as "elapsed <s>". */
#define _POSIX_C_SOURCE 200809L
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

static double now(void) {
  struct timespec ts;
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return (double)ts.tv_sec + 1e-9 * (double)ts.tv_nsec;
}

static double residual(const double *u, long n) {
  double total = 0.0;
  for (long i = 1; i <= n; ++i) {
    double d = u[i - 1] - 2.0 * u[i] + u[i + 1];
    total = total + d * d;
  }
  return total;
}

int main(int argc, char **argv) {
  long n = argc > 1 ? atol(argv[1]) : 100;
  long iters = argc > 2 ? atol(argv[2]) : 10000;
  double *u = calloc((size_t)(n + 2), sizeof *u);
  double *unew = calloc((size_t)(n + 2), sizeof *unew);
  if (!u || !unew) return 1;
  u[n + 1] = 1.0;
  unew[n + 1] = 1.0;
  double t0 = now();
  for (long k = 0; k < iters; ++k) {
    for (long i = 1; i <= n; ++i) unew[i] = (u[i - 1] + u[i + 1]) * 0.5;
    double *tmp = u;
    u = unew;
    unew = tmp;
  }
  double t1 = now();
  double r = residual(u, n);
  char buf[64];
  for (int p = 1; p <= 17; ++p) {
    snprintf(buf, sizeof buf, "%.*g", p, r);
    if (strtod(buf, NULL) == r) break;
  }
  /* Integral values keep a trailing ".0", as MiniPy prints them. */
  printf("%s%s\n", buf, strpbrk(buf, ".eni") ? "" : ".0");
  fprintf(stderr, "elapsed %.9f\n", t1 - t0);
  free(u);
  free(unew);
  return 0;
}
