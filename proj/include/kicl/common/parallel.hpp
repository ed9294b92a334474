#pragma once

#include <cstddef>
#include <functional>

namespace kicl {

// Worker count from KERNELICL_THREADS: unset means hardware concurrency,
// 0 or 1 means run on the calling thread.
std::size_t thread_count();

// Calls fn(i) for i in [0, count), spreading indices over up to `threads`
// workers. Each index runs exactly once. If any call throws, the exception
// from the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t threads);
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace kicl
