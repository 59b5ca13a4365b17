#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace robaudit {

/// Knobs shared by every computation that can split work across threads.
/// Results never depend on `threads`: work is partitioned into contiguous,
/// independent ranges and merged in range order.
struct ComputeOptions {
  unsigned threads = 1;
};

/// Reads ROBAUDIT_THREADS; falls back to `fallback` when unset or malformed.
inline unsigned threads_from_env(unsigned fallback = 1) {
  const char* raw = std::getenv("ROBAUDIT_THREADS");
  if (raw == nullptr || *raw == '\0') return fallback;
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || value < 1) return fallback;
  return static_cast<unsigned>(std::min<long>(value, 1024));
}

/// Calls body(begin, end) on contiguous chunks of [0, n).
template <typename Body>
void parallel_for_ranges(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1));
  if (workers <= 1 || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace robaudit
