#ifndef MESHSTYLE_PARALLEL_HPP
#define MESHSTYLE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace meshstyle {

// Worker cap shared by every parallel loop in the library. 1 runs everything
// inline on the calling thread.
void   set_thread_count(int count);
int    thread_count();

// Runs body(begin, end) over fixed-size chunks of [0, count). Chunk
// boundaries depend only on count and grain, never on the thread count, so
// results are identical for any worker cap as long as body writes disjoint
// outputs per index.
void parallel_for(size_t count, size_t grain,
    const std::function<void(size_t begin, size_t end)>& body);

}  // namespace meshstyle

#endif
