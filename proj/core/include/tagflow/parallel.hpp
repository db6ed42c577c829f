// parallel.hpp - Minimal static-partition parallel loop.
//
// Work is split into contiguous index ranges, one per thread. Callers only use this
// for gather-style loops where each index writes its own output slot, so results do
// not depend on the thread count. Reductions stay serial.

#pragma once

#include <cstddef>
#include <functional>

namespace tagflow {

// 0 means "use TAGFLOW_THREADS if set, else 1".
void set_thread_count(unsigned n);
unsigned thread_count();

void parallel_for(std::size_t count, const std::function<void(std::size_t begin, std::size_t end)> &body);

} // namespace tagflow
