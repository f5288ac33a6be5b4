#include "spasm/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spasm {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int threads) { g_threads = threads < 0 ? 0 : threads; }

int threads_from_env() {
  const char* env = std::getenv("SPASM_THREADS");
  if (env == nullptr) return 0;
  try {
    const int v = std::stoi(env);
    return v > 0 ? v : 0;
  } catch (...) {
    return 0;
  }
}

int num_threads() {
  int t = g_threads.load();
  if (t > 0) return t;
  t = threads_from_env();
  if (t > 0) return t;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace spasm
