#pragma once

#include <cstddef>
#include <functional>

namespace freedenoise {

// Number of worker threads: min(hardware_concurrency, FREEDENOISE_THREADS).
// The environment variable is read once per process.
std::size_t thread_budget();

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
// not depend on the thread count, so results written per index are identical
// for any level of parallelism.
void parallel_for_chunks(std::size_t n, std::size_t chunk,
                         const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace freedenoise
