#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ensconf {

// Runs fn(i) for i in [0, n) on at most `limit` threads. Results land at
// their own index, so output order never depends on completion order.
// The first exception thrown by any task is rethrown after all workers join.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, std::size_t limit, Fn&& fn) {
  std::vector<R> out(n);
  if (n == 0) return out;
  const std::size_t workers = std::max<std::size_t>(1, std::min(limit, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            out[i] = fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace ensconf
