#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "fedsurv/errors.hpp"

namespace fedsurv {

// Resolves the worker count: an explicit request wins, then the
// FEDSURV_THREADS environment variable, then 1. Parallelism is strictly
// opt-in so that default runs stay deterministic and single-threaded.
inline int resolve_threads(int requested = 0) {
  if (requested > 0) {
    return requested;
  }
  if (const char* env = std::getenv("FEDSURV_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("FEDSURV_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    return static_cast<int>(v);
  }
  return 1;
}

// Runs fn(i) for i in [0, n) across `threads` workers on contiguous chunks.
// Bodies must not touch shared mutable state; the first exception thrown by
// any worker is rethrown on the caller's thread.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) {
    return;
  }
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  const int chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    workers.emplace_back([&fn, &errors, w, begin, end] {
      try {
        for (int i = begin; i < end; ++i) {
          fn(i);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) {
    t.join();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace fedsurv
