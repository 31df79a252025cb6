#pragma once

#include <cstddef>
#include <functional>

namespace emg {

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0 or 1 runs
/// inline). The first exception thrown by any body is rethrown after all
/// workers stop.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& body);

}  // namespace emg
