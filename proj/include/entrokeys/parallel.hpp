#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace entrokeys {

/// Thread count from ENTROKEYS_THREADS, else hardware concurrency (at least 1).
inline int default_thread_count() {
  if (const char* env = std::getenv("ENTROKEYS_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(task) for task in [0, n_tasks) on up to `threads` workers.
/// Tasks are claimed dynamically; each task must write only its own output so
/// results do not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for(int n_tasks, int threads, Body&& body) {
  if (n_tasks <= 0) return;
  threads = std::clamp(threads, 1, n_tasks);
  if (threads == 1) {
    for (int t = 0; t < n_tasks; ++t) body(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
      try {
        body(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_tasks);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace entrokeys
