#pragma once

#include <cstddef>
#include <functional>

namespace naln {

// Worker budget: NALN_THREADS when set (clamped to >= 1), else the hardware
// concurrency. Read once per process.
std::size_t thread_budget();

// Runs body over contiguous chunks of [0, n). Each index is handled by exactly
// one worker and chunk-internal order is serial, so results are bitwise
// independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace naln
