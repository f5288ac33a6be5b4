#pragma once

#include <cstddef>
#include <cstdint>

namespace spasm {

// Worker count used by batch kernels. 0 means "runtime default"
// (OpenMP's choice, or SPASM_THREADS when set).
void set_num_threads(int threads);
int num_threads();

// Reads SPASM_THREADS; returns 0 when unset or unparsable.
int threads_from_env();

// Row-parallel loop over [0, n). Each index is processed exactly once, in
// no particular order, so the body must only write state owned by index i.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads())
#endif
  for (std::int64_t i = 0; i < count; ++i) {
    body(static_cast<std::size_t>(i));
  }
}

// Serial twin of parallel_for, used by the reference kernels.
template <class Body>
void serial_for(std::size_t n, Body&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// splitmix64 finalizer: derives independent per-particle RNG seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t restart,
                                    std::uint64_t index) {
  return mix_seed(mix_seed(mix_seed(seed) ^ restart) ^ index);
}

}  // namespace spasm
