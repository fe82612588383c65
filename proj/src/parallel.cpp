#include "meshstyle/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace meshstyle {

namespace {
std::atomic<int> worker_cap{0};
}

void set_thread_count(int count) { worker_cap = std::max(count, 0); }

int thread_count() {
  auto cap = worker_cap.load();
  if (cap > 0) return cap;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(size_t count, size_t grain,
    const std::function<void(size_t, size_t)>& body) {
  if (count == 0) return;
  grain       = std::max<size_t>(grain, 1);
  auto chunks = (count + grain - 1) / grain;
  auto workers = std::min<size_t>(thread_count(), chunks);
  if (workers <= 1) {
    for (size_t c = 0; c < chunks; c++)
      body(c * grain, std::min(count, (c + 1) * grain));
    return;
  }

  auto next  = std::atomic<size_t>{0};
  auto error = std::exception_ptr{};
  auto mutex = std::mutex{};
  auto work  = [&]() {
    while (true) {
      auto c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        body(c * grain, std::min(count, (c + 1) * grain));
      } catch (...) {
        auto lock = std::lock_guard{mutex};
        if (!error) error = std::current_exception();
        next = chunks;
        return;
      }
    }
  };
  auto threads = std::vector<std::thread>{};
  for (size_t t = 1; t < workers; t++) threads.emplace_back(work);
  work();
  for (auto& thread : threads) thread.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace meshstyle
