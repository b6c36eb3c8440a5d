#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace prefnet {

/// Sets the OpenMP worker cap; values < 1 leave the runtime default.
void set_thread_count(int threads);
int thread_count();

/// Sum of f(i) for i in [0, n). Partial sums are taken over fixed-size blocks
/// in parallel and then added in block order, so the result is bitwise
/// identical for any thread count.
template <typename F>
double deterministic_sum(std::size_t n, F&& f, std::size_t block = 4096) {
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = lo + block < n ? lo + block : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace prefnet
