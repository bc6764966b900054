#pragma once

#include <cstddef>
#include <functional>

namespace meshmamba {

// Worker cap for parallel sections. 0 means hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
// so bodies that only write their own indices give thread-count independent
// results.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace meshmamba
