#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <utility>
#include <vector>

namespace dnstein::detail {

inline int& thread_setting() {
  static int n = 0;  // 0 = auto
  return n;
}

inline void set_threads(int n) { thread_setting() = n; }

inline int threads() {
  int n = thread_setting();
  if (n > 0) return n;
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Splits [0, n) into `chunks` near-equal ranges. Boundaries depend only on
// n and chunks, never on the worker count, so chunk-ordered merges are
// reproducible for any --threads value.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, int chunks, int c) {
  std::size_t lo = n * static_cast<std::size_t>(c) / chunks;
  std::size_t hi = n * static_cast<std::size_t>(c + 1) / chunks;
  return {lo, hi};
}

// Runs f(c) for c = 0..n_chunks-1 on up to threads() workers. Workers pull
// chunks from a shared counter; f must not throw.
template <class F>
void run_chunks(int n_chunks, F&& f) {
  int nt = std::min(threads(), n_chunks);
  if (nt <= 1) {
    for (int c = 0; c < n_chunks; ++c) f(c);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= n_chunks) return;
      f(c);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt) - 1);
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace dnstein::detail
