#include "alloc_tuning.hpp"

#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rseed::detail {

void tune_allocator_for_iteration_churn() {
    static std::once_flag once;
    std::call_once(once, [] {
#if defined(__GLIBC__)
        // Keep iteration-sized blocks on the heap instead of mmap, and never
        // trim the heap top for less than 256 MiB: the loop's churn then stays
        // cached in the arena instead of round-tripping through the kernel.
        mallopt(M_MMAP_THRESHOLD, 64 << 20);
        mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
    });
}

} // namespace rseed::detail
