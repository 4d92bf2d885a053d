#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ladder {

template <typename MakeState, typename Fn>
void run_bounded(std::size_t n, int max_workers, MakeState make_state, Fn fn) {
  if (n == 0) return;
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_workers)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    try {
      auto state = make_state();
      for (std::size_t i = next++; i < n; i = next++) fn(state, i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ladder
