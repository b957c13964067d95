#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace inkgan {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value = [] {
    const char* env = std::getenv("INKGAN_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    try {
      return std::max(0, std::stoi(env));
    } catch (...) {
      return 0;
    }
  }();
  return value;
}
}  // namespace detail

/// Worker threads used by parallel kernels. 0 (the default, and the value of
/// INKGAN_THREADS=0) selects deterministic single-threaded execution.
inline int thread_count() { return detail::thread_setting().load(); }

inline void set_thread_count(int n) { detail::thread_setting().store(std::max(0, n)); }

/// Runs fn(i) for i in [0, n). Every index is processed independently, so the
/// results do not depend on the thread count; callers reduce in index order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(thread_count());
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace inkgan
