#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace capmat {

namespace detail {
inline std::atomic<int>& threadSetting() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Worker count used by parallelFor; values < 1 select hardware concurrency.
inline void setThreadCount(int n) {
  if (n < 1) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  detail::threadSetting().store(n);
}

inline int threadCount() { return detail::threadSetting().load(); }

/// Calls fn(i) for i in [0, n) over contiguous static chunks. Callers write only to
/// per-index slots, so results do not depend on the thread count.
template <class Fn>
void parallelFor(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threadCount()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex errorMutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errorMutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace capmat
