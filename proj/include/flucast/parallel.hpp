#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace flucast {

// Maximum useful worker count on this machine.
int hardware_jobs();

// Runs fn(i) for i in [0, n). jobs <= 1 runs inline; jobs > 1 uses an OpenMP
// parallel-for when available. fn must write only to per-index slots; the
// first exception (by index) is rethrown after the loop so failures are
// schedule-independent.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace flucast
