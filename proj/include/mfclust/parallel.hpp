#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace mfclust {

// Number of worker threads used when the caller asks for "default":
// MFCLUST_THREADS if set, otherwise the OpenMP processor count.
int default_thread_count();

// Runs body(i) for i in [0, count). threads <= 1 executes the plain serial
// loop in index order, which is the reference the OpenMP path is tested
// against. Each index writes only its own output slot, so results are
// identical regardless of scheduling. The first exception (lowest index) is
// rethrown after the loop.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mfclust
