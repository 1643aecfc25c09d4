#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "lmprobe/error.hpp"

namespace lmprobe {

// Run task(0..n_tasks-1) on `width` threads pulling from a shared index.
// The first exception aborts remaining work and is rethrown after all
// workers join; completed tasks stay completed.  `should_stop` is polled
// between tasks for cooperative early exit (no exception raised).
inline void run_parallel(size_t width, size_t n_tasks,
                         const std::function<void(size_t)>& task,
                         const std::function<bool()>& should_stop = {}) {
  if (width < 1) throw ConfigError("parallelism must be >= 1");
  if (n_tasks == 0) return;
  width = std::min(width, n_tasks);

  std::atomic<size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      if (should_stop && should_stop()) return;
      const size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_tasks) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true, std::memory_order_relaxed);
      }
    }
  };

  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(width);
    for (size_t t = 0; t < width; ++t) threads.emplace_back(worker);
    for (std::thread& th : threads) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lmprobe
