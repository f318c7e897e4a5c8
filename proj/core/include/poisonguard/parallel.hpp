#pragma once

#include <cstddef>
#include <functional>

namespace poisonguard {

// Worker cap: POISONGUARD_THREADS when set, otherwise hardware concurrency.
std::size_t max_parallelism();

// Run fn(0..n-1) on up to max_parallelism() threads. Each task must be
// self-contained (own seeds, own output slot) so results are identical
// regardless of scheduling. Exceptions are rethrown on the caller thread.
void parallel_for_each(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace poisonguard
