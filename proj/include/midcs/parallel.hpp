#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace midcs {

// Worker count used by the library. Defaults to 1; the CLI sets it from
// --threads or MIDCS_THREADS. Results never depend on this value because every
// parallel loop writes into index-addressed slots and reduces in index order.
inline std::atomic<unsigned>& thread_count_slot() {
  static std::atomic<unsigned> count{1};
  return count;
}

inline unsigned thread_count() { return thread_count_slot().load(); }

inline void set_thread_count(unsigned k) { thread_count_slot().store(std::max(1u, k)); }

// Reads MIDCS_THREADS; returns 0 when unset or unparsable.
inline unsigned threads_from_env() {
  const char* env = std::getenv("MIDCS_THREADS");
  if (env == nullptr) return 0;
  try {
    const long v = std::stol(env);
    return v > 0 ? static_cast<unsigned>(v) : 0;
  } catch (...) {
    return 0;
  }
}

// Runs body(i) for i in [0, count) on a bounded pool. The first exception
// thrown by any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(thread_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace midcs
