#pragma once

#include <cstddef>
#include <functional>

namespace syncmatrix::runtime {

// Global worker cap for data-parallel loops. Defaults to the hardware
// concurrency; the CLI wires --workers / SYNCMATRIX_WORKERS through here.
void set_workers(std::size_t n);
std::size_t workers();

// Runs fn(begin, end) over a partition of [0, count) across up to workers()
// threads. Partitions are contiguous and depend only on count and the worker
// cap, and every element is processed by exactly one invocation, so any
// per-element computation with a fixed internal order is reproducible.
// Falls back to a single inline call when the work is small.
void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace syncmatrix::runtime
