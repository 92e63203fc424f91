#pragma once

#include <cstddef>
#include <functional>

namespace rdcc {

// Worker count for parallel_for. Honors RDCC_DETERMINISM=1 by returning 1;
// results are identical for any worker count regardless (each output element
// is owned by exactly one worker and accumulated in a fixed order), the env
// var just removes threading altogether.
unsigned worker_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). Callers must only
// write to outputs indexed by the chunk.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace rdcc
