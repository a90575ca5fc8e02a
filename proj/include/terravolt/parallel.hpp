#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace terravolt {

// Runs fn(i) for i in [0, n) across up to n_threads workers. Work is dealt in
// contiguous blocks by a shared atomic-free scheme: worker w takes indices
// congruent to w modulo the worker count. Callers that need deterministic
// floating-point results must write into per-index slots and reduce in index
// order afterwards; this helper makes no ordering promise of its own.
inline void parallel_for(std::size_t n, unsigned n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned hw = std::max(1u, n_threads);
  hw = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (hw == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(hw);
  workers.reserve(hw);
  for (unsigned w = 0; w < hw; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += hw) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace terravolt
