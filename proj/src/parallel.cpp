#include "uflst/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace uflst {

namespace {

std::size_t from_env() noexcept {
  const char* env = std::getenv("UFLST_THREADS");
  if (!env) return 1;
  try {
    const long v = std::stol(env);
    return v > 0 ? static_cast<std::size_t>(v) : 1;
  } catch (...) {
    return 1;
  }
}

std::atomic<std::size_t>& slot() noexcept {
  static std::atomic<std::size_t> n{from_env()};
  return n;
}

}  // namespace

std::size_t thread_count() noexcept { return slot().load(); }

void set_thread_count(std::size_t n) noexcept { slot().store(std::max<std::size_t>(n, 1)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace uflst
