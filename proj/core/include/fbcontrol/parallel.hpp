#pragma once

#include <cstddef>
#include <functional>

namespace fbcontrol {

/// Runs fn(i) for every i in [0, n), split into contiguous blocks across at
/// most `threads` workers.  fn must only write state owned by its own index,
/// so results cannot depend on the worker count.  Exceptions from workers are
/// rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Clamps a requested worker count to [1, hardware_concurrency].
unsigned clamp_threads(unsigned requested);

}
