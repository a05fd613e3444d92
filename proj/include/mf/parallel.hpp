#pragma once

#include <cstddef>
#include <functional>

namespace mf {

// Worker cap shared by all parallel loops. 0 means hardware concurrency.
// Output must not depend on the value: work items own disjoint results.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Items are claimed atomically; each item must
// write only to its own output slot so results are thread-count independent.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace mf
