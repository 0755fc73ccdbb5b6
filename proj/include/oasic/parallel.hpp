#pragma once

#include <cstddef>
#include <functional>

namespace oasic {

/// Worker count: OASIC_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
/// visited exactly once; callers write results into per-index slots. The
/// first exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace oasic
