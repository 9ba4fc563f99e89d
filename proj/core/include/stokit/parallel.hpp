#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stokit {

// Paths per reduction block. Blocks are fixed by the path count alone, so
// block-ordered reductions give bitwise identical results for any worker count.
inline constexpr std::size_t kPathBlock = 64;

inline int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Calls body(block_index, begin, end) for every block of [0, n). Blocks are
// handed out dynamically; the first exception thrown by any worker is
// rethrown on the calling thread.
template <class Body>
void for_each_block(std::size_t n, int workers, Body&& body, std::size_t block = kPathBlock) {
  const std::size_t n_blocks = (n + block - 1) / block;
  if (n_blocks == 0) return;
  const std::size_t n_threads =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n_blocks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        body(b, b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_blocks);
        return;
      }
    }
  };

  if (n_threads == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads - 1);
    for (std::size_t i = 0; i + 1 < n_threads; ++i) pool.emplace_back(run);
    run();
  }
  if (failure) std::rethrow_exception(failure);
}

// Map-reduce over paths: map(path_index, acc) accumulates into a per-block
// accumulator; block results are merged in block order.
template <class Acc, class MakeAcc, class Map>
Acc reduce_paths(std::size_t n, int workers, MakeAcc&& make, Map&& map) {
  const std::size_t n_blocks = (n + kPathBlock - 1) / kPathBlock;
  std::vector<Acc> partial;
  partial.reserve(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) partial.push_back(make());
  for_each_block(n, workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) map(i, partial[b]);
  });
  Acc total = make();
  for (auto& p : partial) total.merge(p);
  return total;
}

}  // namespace stokit
