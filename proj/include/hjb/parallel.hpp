#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hjb {

/// Runs body(i) for i in [0, n) on up to `threads` threads, in contiguous
/// chunks. Callers write results into per-index slots and reduce afterwards in
/// index order, so output does not depend on the thread count.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
  if (threads <= 1 || n < 2 * threads) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(n) * t / threads);
    const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / threads);
    workers.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace hjb
