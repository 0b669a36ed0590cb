#pragma once

#include <cstddef>
#include <functional>

namespace safepatch {

// Static partition over [0, n); results must be written by index so the
// merge order is deterministic. threads <= 1 runs inline.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

// Worker cap from SAFEPATCH_THREADS, else hardware concurrency.
int default_thread_count();

} // namespace safepatch
