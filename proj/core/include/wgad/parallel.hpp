#pragma once

#include <cstdint>
#include <functional>

namespace wgad {

// Thread budget for embarrassingly-parallel scoring work: the WGAD_THREADS
// environment variable caps it, otherwise hardware concurrency is used.
int thread_budget();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks across at
// most thread_budget() threads; callers write results into disjoint
// preallocated slots, so the outcome is independent of the thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace wgad
