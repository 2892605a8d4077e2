#include "ealpha/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ealpha {

namespace {

std::atomic<int> explicit_cap{0};

int env_cap() {
  const char* raw = std::getenv("ENSEMBLE_ALPHA_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    const int n = std::stoi(raw);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

}  // namespace

int max_threads() {
  const int cap = explicit_cap.load(std::memory_order_relaxed);
  if (cap > 0) return cap;
  const int env = env_cap();
  if (env > 0) return env;
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
  explicit_cap.store(n > 0 ? n : 0, std::memory_order_relaxed);
}

}  // namespace ealpha
