#pragma once

#include <functional>

#include "pcup/types.hpp"

namespace pcup {

/// Worker count for view-parallel rendering; reads PCUP_THREADS once, falls
/// back to the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs fn(0..n-1) on up to thread_count() workers. Tasks must write disjoint
/// outputs; results are then independent of the schedule.
void parallel_for(Index n, const std::function<void(Index)>& fn);

}  // namespace pcup
