#pragma once

#include <cstddef>
#include <functional>

namespace qtherm {

/// Calls fn(i) for every i in [0, count) using `workers` threads.
///
/// Index i is always handled by worker i % workers, but callers must not rely
/// on that: every index writes its own output slot and reductions happen
/// afterwards in index order. The first exception thrown by any task is
/// rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

/// Worker count used when the caller passes 0.
unsigned default_workers() noexcept;

}  // namespace qtherm
