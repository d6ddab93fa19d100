#pragma once

#include <cstddef>
#include <functional>

namespace uflst {

// Worker count for row-parallel loops. Defaults to UFLST_THREADS (or 1).
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

// Calls fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// results that are written per index do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace uflst
