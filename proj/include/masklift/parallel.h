#pragma once

#include <cstddef>
#include <functional>

namespace masklift {

// Process-wide worker count used by parallel_for. Defaults to the number of
// hardware threads.
void set_thread_count(int n);
int thread_count();

// Calls fn(i) for every i in [0, n). Iterations are distributed in
// contiguous blocks; fn must only write to state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace masklift
