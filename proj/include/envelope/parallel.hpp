#pragma once

#include <cstddef>
#include <functional>

namespace envelope {

/// Number of worker threads to use: `requested` if positive, otherwise the
/// ENVFIT_THREADS environment variable, otherwise the hardware concurrency.
unsigned resolve_threads(int requested);

/// Runs task(i) for i in [0, count) on up to `threads` workers. Tasks must
/// write only to their own slot of any shared output. The first exception
/// thrown by a task is rethrown after all workers have joined.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

}  // namespace envelope
