#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace plc::par {

/// Caps the number of OpenMP threads used by the parallel kernels.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Iterations must be independent (disjoint writes).
template <typename F>
void for_each_index(std::int64_t n, F&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i);
  }
}

// Reductions are chunked with a fixed chunk size and the partials are folded
// in chunk order, so results do not depend on the number of threads.
inline constexpr std::int64_t kReduceChunk = 2048;

/// Deterministic sum of value_of(i) over [0, n).
template <typename F>
double sum_indexed(std::int64_t n, F&& value_of) {
  if (n <= 0) return 0.0;
  const std::int64_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t c = 0; c < nchunks; ++c) {
    const std::int64_t lo = c * kReduceChunk;
    const std::int64_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) acc += value_of(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Deterministic count of indices satisfying pred.
template <typename F>
std::int64_t count_indexed(std::int64_t n, F&& pred) {
  std::int64_t total = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    if (pred(i)) ++total;
  }
  return total;
}

}  // namespace plc::par
