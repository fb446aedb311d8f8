#pragma once

#include <cstddef>
#include <functional>

namespace sfg {

/// Worker cap from SFG_THREADS (unset or 0 means one per hardware thread).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = worker_count()).
/// Callers write results into per-index slots, so the outcome does not
/// depend on scheduling. The exception from the lowest failing index is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace sfg
