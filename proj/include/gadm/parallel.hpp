#pragma once

#include <cstddef>
#include <functional>

namespace gadm {

/// Worker count taken from the GADM_THREADS environment variable (default 1).
std::size_t configured_threads();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks across
/// configured_threads() workers; nested calls run serially on the caller.
/// Callers write results into per-index slots, so output is independent of
/// the thread count. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gadm
