#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace neurocal {

// Number of workers to use: explicit request > NEUROCAL_JOBS > hardware.
inline int resolve_jobs(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NEUROCAL_JOBS")) {
    int j = std::atoi(env);
    if (j > 0) return j;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Parallel loop over [0, n). Each index must be independent; results are
// deterministic because no cross-index reductions happen here.
template <class F>
void parallel_for(int n, F&& body, int jobs = 0) {
  int nj = resolve_jobs(jobs);
#ifdef _OPENMP
  if (nj > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(nj)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  (void)nj;
  for (int i = 0; i < n; ++i) body(i);
}

// Serial reference for the same loop shape; kept for tests and benchmarks.
template <class F>
void serial_for(int n, F&& body) {
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace neurocal
