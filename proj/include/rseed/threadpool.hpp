#pragma once

#include <functional>

namespace rseed {

// Worker cap for op-internal parallelism: RSEED_THREADS if set, else
// hardware_concurrency. Read once per process.
int max_threads();

// Runs fn(0..n-1). Chunks may execute on pool workers; every chunk writes
// disjoint output, so results do not depend on the schedule.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace rseed
