#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace epimc {

/// Runs fn(begin, end) over `jobs` contiguous chunks of [0, n). Chunk
/// boundaries are multiples of `align` so callers may write packed words
/// without sharing them between threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn, std::size_t align = 64) {
  if (n == 0) return;
  jobs = std::max(1u, jobs);
  std::size_t chunk = (n + jobs - 1) / jobs;
  chunk = ((chunk + align - 1) / align) * align;
  if (jobs == 1 || chunk >= n) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace epimc
