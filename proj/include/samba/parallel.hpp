#pragma once

// Fan-out over independent work items. Every item must own its tape.

#include <cstddef>
#include <functional>

namespace samba {

// SAMBA_THREADS if set (>= 1), otherwise the hardware concurrency.
std::size_t worker_limit();

// Runs fn(0..n-1) on up to worker_limit() threads. The first exception thrown
// by any item is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace samba
