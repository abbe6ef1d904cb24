#pragma once

#include <cstddef>
#include <functional>

namespace wasncal::harness {

/// Calls fn(i) for every i in [0, n) on up to `workers` threads (0 picks the
/// hardware concurrency). Each index must write only its own output slot, so
/// results never depend on scheduling. The exception of the lowest failing
/// index is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = 0);

}  // namespace wasncal::harness
