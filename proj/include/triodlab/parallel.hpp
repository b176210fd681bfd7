#pragma once

// Index-parallel loops capped by the TRIODLAB_THREADS environment variable.

#include <cstddef>
#include <functional>

namespace triodlab {

/// Worker count: TRIODLAB_THREADS when set to a positive integer, else the hardware concurrency.
int thread_count();

/// Calls fn(i) for i in [0, n). Each index is visited exactly once; results must be written
/// to per-index storage so the outcome does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace triodlab
