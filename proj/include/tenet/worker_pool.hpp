#pragma once

#include <cstddef>
#include <functional>

namespace tenet {

/// Worker count from TENET_POOL_THREADS, else the hardware concurrency (>= 1).
std::size_t pool_threads();

/// Runs fn(0) .. fn(n - 1) on up to `threads` workers. Each index is handled
/// by exactly one call; the first exception thrown is rethrown after all
/// workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = pool_threads());

}  // namespace tenet
