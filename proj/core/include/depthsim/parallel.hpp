#pragma once

#include <cstddef>
#include <functional>

namespace depthsim {

// Process-wide worker count used by every internally parallel operation.
// Values < 1 reset to std::thread::hardware_concurrency().
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() threads. Work items are
// claimed dynamically, so callers must make each item's result independent of
// which thread ran it. Nested calls from inside a worker run serially. The
// first exception thrown by any item is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// RAII override of the thread count (tests, benchmarks).
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(int n);
  ~ScopedThreadCount();
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  int previous_;
};

}  // namespace depthsim
