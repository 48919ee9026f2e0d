#pragma once

#include <cstddef>
#include <functional>

namespace kernelforge {

/// Number of worker threads used by the parallel helpers. Defaults to 1.
int num_threads();

/// Sets the worker count; values < 1 are clamped to 1.
void set_num_threads(int n);

/// Runs body(i) for i in [0, count). Work is split into contiguous chunks,
/// one per thread. Callers must only write to disjoint outputs per index so
/// results do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace kernelforge
