#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ropd::util {

/// Runs `fn(i)` for i in [0, count) with at most `max_parallel` workers.
/// Results and exceptions are slotted by index, so the outcome is
/// independent of scheduling order.
template <typename T>
std::vector<T> parallel_map(std::size_t count, std::size_t max_parallel,
                            const std::function<T(std::size_t)>& fn,
                            std::vector<std::exception_ptr>* errors = nullptr) {
  std::vector<T> results(count);
  std::vector<std::exception_ptr> local_errors(count);
  if (max_parallel <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        results[i] = fn(i);
      } catch (...) {
        local_errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          results[i] = fn(i);
        } catch (...) {
          local_errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> threads;
    std::size_t workers = std::min(max_parallel, count);
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (errors != nullptr) {
    *errors = std::move(local_errors);
  } else {
    for (auto& e : local_errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return results;
}

}  // namespace ropd::util
