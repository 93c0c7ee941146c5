#pragma once

#include <cstddef>
#include <functional>

namespace prospectq {

/// Worker count: PROSPECTQ_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
int thread_cap();

/// Calls body(i) for i in [0, n) on up to thread_cap() threads.  Each index is
/// processed exactly once; callers write results into slot i so the merge
/// order does not depend on scheduling.  The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace prospectq
