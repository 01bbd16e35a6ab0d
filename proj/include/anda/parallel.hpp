#pragma once

#include <cstddef>
#include <functional>

namespace anda {

// Thread count from ANDA_THREADS, falling back to the hardware concurrency.
std::size_t default_thread_count();

// Calls fn(i) for every i in [0, count) on up to `threads` workers. Callers
// write results into slot i, so the outcome does not depend on scheduling.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace anda
