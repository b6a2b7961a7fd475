#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace hepato {

// Static partition of [0, n) across up to `threads` workers. Work items must
// be independent; results are written to disjoint slots so the outcome does
// not depend on the worker count.
inline void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  int hw = int(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  threads = std::max(1, std::min({threads, hw, int(n)}));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int64_t lo = t * chunk;
    int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace hepato
