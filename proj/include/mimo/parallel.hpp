#pragma once

#include <cstdint>
#include <functional>

namespace mimo {

/// Worker-thread budget: MIMO_THREADS when set (>= 1), otherwise the
/// hardware concurrency.
unsigned thread_budget();

/// Runs fn(chunk) for chunk in [0, n_chunks) across up to thread_budget()
/// workers. The chunk decomposition is caller-defined and fixed, so any
/// reduction done in chunk order is independent of the thread count.
void parallel_for_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn);

} // namespace mimo
