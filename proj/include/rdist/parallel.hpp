#pragma once

#include <cstddef>
#include <functional>

namespace rdist {

/// Process-wide worker count for data-parallel loops. 0 selects
/// std::thread::hardware_concurrency().
void set_worker_count(int n);
int worker_count();

/// Calls fn(i) for every i in [begin, end), split into contiguous chunks over
/// worker_count() threads (or `workers` when positive). fn must only write to
/// state owned by index i; results are then independent of the worker count.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn,
                  int workers = 0);

}  // namespace rdist
