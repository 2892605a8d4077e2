#pragma once

#include <cstddef>
#include <exception>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace ealpha {

enum class ExecMode { serial, parallel };

/// Effective worker cap: explicit set_max_threads() wins, then the
/// ENSEMBLE_ALPHA_THREADS environment variable, then the OpenMP default.
int max_threads();
void set_max_threads(int n);  // n <= 0 restores the default

/// Plain loop, the reference execution path.
template <typename F>
void serial_for(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

/// OpenMP loop. Bodies must write disjoint slots; with that contract the
/// result is identical to serial_for for any thread count. A throwing body is
/// caught inside the region and the first exception rethrown afterwards,
/// since exceptions must not escape an OpenMP region.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
#if defined(_OPENMP)
  const int threads = max_threads();
  std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(ealpha_parallel_for_error)
      if (first_error == nullptr) first_error = std::current_exception();
    }
  }
  if (first_error != nullptr) std::rethrow_exception(first_error);
#else
  serial_for(n, body);
#endif
}

template <typename F>
void run_for(ExecMode mode, std::size_t n, F&& body) {
  if (mode == ExecMode::parallel) {
    parallel_for(n, body);
  } else {
    serial_for(n, body);
  }
}

}  // namespace ealpha
