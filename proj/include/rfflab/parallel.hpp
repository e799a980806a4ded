#pragma once

// Index-parallel loops. Work items are claimed from an atomic counter and
// results are stored by index, so the output never depends on the number
// of workers or on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rfflab {

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Calls fn(i) for i in [0, n) on up to `workers` threads (0 = default).
/// The first exception thrown by any call is rethrown after all threads join.
template <class Fn>
void parallel_for(std::int64_t n, unsigned workers, Fn&& fn) {
  if (n <= 0) return;
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::int64_t>(workers, n));
  if (workers == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

template <class T, class Fn>
std::vector<T> parallel_map(std::int64_t n, unsigned workers, Fn&& fn) {
  std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  parallel_for(n, workers, [&](std::int64_t i) { out[static_cast<std::size_t>(i)] = fn(i); });
  return out;
}

}  // namespace rfflab
