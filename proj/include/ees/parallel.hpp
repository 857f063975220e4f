#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ees {

//! Number of worker threads to use for `n_jobs <= 0` (all hardware threads).
inline int resolve_jobs(int n_jobs)
{
  if (n_jobs > 0)
    return n_jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

//! Runs fn(i) for i in [0, n). Tasks must be independent and write to
//! disjoint output slots; combined with per-index seed derivation this makes
//! results identical for any thread count. The first exception thrown by a
//! task is rethrown on the calling thread after all workers join.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn,
                         int n_jobs = 0)
{
  const int jobs = resolve_jobs(n_jobs);
  if (n <= 0)
    return;
  if (jobs == 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i)
      fn(i);
    return;
  }

  std::atomic<std::int64_t> next{ 0 };
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error)
          first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  const int n_threads = static_cast<int>(std::min<std::int64_t>(jobs, n));
  pool.reserve(static_cast<std::size_t>(n_threads) - 1);
  for (int t = 1; t < n_threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& th : pool)
    th.join();

  if (first_error)
    std::rethrow_exception(first_error);
}

} // namespace ees
