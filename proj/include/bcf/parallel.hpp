#pragma once

#include <cstddef>
#include <functional>

namespace bcf {

/// Worker count: BCF_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
int thread_count();
/// Overrides BCF_THREADS for the current process; 0 restores the default.
void set_thread_count(int n);

/// Calls fn(i) for every i in [0, n). Work is split into contiguous ranges
/// handed to worker threads; fn must only write state owned by index i so
/// results never depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bcf
