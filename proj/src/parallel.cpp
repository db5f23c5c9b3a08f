#include "pcup/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pcup {

namespace {

int detect_threads() {
  if (const char* env = std::getenv("PCUP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

int g_threads = -1;

}  // namespace

int thread_count() {
  if (g_threads < 1) g_threads = detect_threads();
  return g_threads;
}

void set_thread_count(int n) { g_threads = n >= 1 ? n : 1; }

void parallel_for(Index n, const std::function<void(Index)>& fn) {
  const int workers = std::min<Index>(thread_count(), n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (Index i = next.fetch_add(1); i < n && !failed.load(); i = next.fetch_add(1)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pcup
