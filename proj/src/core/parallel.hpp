#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace attnsl {

inline int env_threads() {
  if (const char* s = std::getenv("ATTNSL_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return 1;
}

// threads <= 0 means "use ATTNSL_THREADS or 1".
inline int resolve_threads(int threads) {
  return threads >= 1 ? threads : env_threads();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is chunked by
// index; fn must write only to per-index slots so the schedule cannot affect
// results.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t t = std::min<std::size_t>(threads, n);
  std::size_t chunk = (n + t - 1) / t;
  std::vector<std::thread> pool;
  std::mutex mu;
  std::exception_ptr err;
  for (std::size_t w = 0; w < t; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace attnsl
