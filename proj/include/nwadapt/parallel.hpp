#pragma once

#include <cstddef>
#include <functional>

namespace nwadapt {

// Worker cap: NWADAPT_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// callers that write only to slot i get results independent of the thread
// count. Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nwadapt
