#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crc {

inline int hardware_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// jobs <= 0 means "all available".
inline int resolve_jobs(int jobs) {
  if (jobs <= 0) return hardware_jobs();
  return jobs;
}

/// Runs fn(i) for i in [0, n). jobs == 1 is the serial reference path; any
/// other value runs the same body under OpenMP with a static schedule.
/// fn(i) must write only to slot i of its outputs, so the result is
/// identical for every jobs value.
template <typename Fn>
void parallel_for(std::int64_t n, int jobs, Fn&& fn) {
  jobs = resolve_jobs(jobs);
  if (jobs == 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(jobs)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace crc
