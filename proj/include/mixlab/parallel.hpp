#pragma once

// Trial-parallel kernels. Each kernel has an OpenMP version and a serial
// reference with identical per-index semantics; the two must agree bit for bit.

#include <cstddef>
#include <exception>
#include <mutex>
#include <vector>

#include <omp.h>

namespace mixlab {

struct ExecPolicy {
  int workers = 1;
};

/// out[i] = fn(i) for i in [0, n), one thread.
template <class Fn>
auto map_indices_serial(std::size_t n, Fn&& fn) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

/// out[i] = fn(i) for i in [0, n) on `policy.workers` OpenMP threads. The
/// first exception thrown by any fn(i) is rethrown after the loop.
template <class Fn>
auto map_indices(std::size_t n, ExecPolicy policy, Fn&& fn) {
  using T = decltype(fn(std::size_t{0}));
  if (policy.workers <= 1) return map_indices_serial(n, fn);
  std::vector<T> out(n);
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(policy.workers) schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mixlab
