#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace imago {

/// Number of workers to use when the caller passes 0.
inline unsigned default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Calls body(begin, end, chunk) over `workers` contiguous chunks of [0, n).
/// Chunk boundaries depend only on n and workers; callers that write to
/// per-index or per-chunk slots get results independent of scheduling.
template <class Body>
void parallel_chunks(std::size_t n, unsigned workers, Body&& body) {
  if (workers == 0) workers = default_workers();
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (chunks == 1) {
    body(std::size_t{0}, n, std::size_t{0});
    return;
  }
  const std::size_t step = (n + chunks - 1) / chunks;
  std::vector<std::jthread> threads;
  threads.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = std::min(n, c * step);
    const std::size_t end = std::min(n, begin + step);
    threads.emplace_back([&body, begin, end, c] { body(begin, end, c); });
  }
}

/// Number of chunks parallel_chunks will use for the same arguments.
inline std::size_t chunk_count(std::size_t n, unsigned workers) {
  if (workers == 0) workers = default_workers();
  return std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
}

}  // namespace imago
