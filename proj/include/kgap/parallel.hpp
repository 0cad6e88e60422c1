#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kgap {

/// Thread budget resolved by the caller (CLI flag, environment, config).
struct ThreadBudget
{
  int threads = 1;
};

/**
 * Runs body(k) for k in [0, count) on up to `threads` workers with a static
 * interleaved schedule. Callers write results into per-index slots, so the
 * outcome never depends on the thread count. The first exception is rethrown.
 */
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body)
{
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) {
      body(k);
    }
    return;
  }
  std::exception_ptr error;
  std::mutex guard;
  std::vector<std::thread> pool;
  const std::size_t used = std::min(workers, count);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t k = w; k < count; k += used) {
          body(k);
        }
      }
      catch (...) {
        const std::lock_guard<std::mutex> lock(guard);
        if (!error) {
          error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace kgap
