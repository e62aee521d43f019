#pragma once

#include <cstddef>
#include <functional>

namespace paracalc {

/// Upper bound on worker threads used by parallel loops (>= 1).
void set_thread_limit(int n);
int thread_limit();

/// Runs body(i) for i in [0, count) on up to thread_limit() threads.
/// The first exception thrown by any iteration is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace paracalc
