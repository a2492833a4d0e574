#pragma once

namespace rseed::detail {

// Raises glibc's malloc caching thresholds (idempotent, call anywhere before
// an optimization loop). Each optimization step allocates and frees tens of
// megabytes of graph tensors; with default thresholds glibc hands that memory
// back to the kernel on every free cycle and the next step pays a page fault
// per 4 KiB to reclaim it, which measured as ~30% of iteration wall time on
// one core. No numeric effect — only where freed pages are cached.
void tune_allocator_for_iteration_churn();

} // namespace rseed::detail
