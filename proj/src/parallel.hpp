#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ccpde {

/// Worker count from CCPDE_THREADS (default 1). Results are written into
/// per-index slots, so parallel runs reproduce sequential output exactly.
inline int thread_count() {
  if (const char* env = std::getenv("CCPDE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)>& body) {
  const int workers = thread_count();
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const int used = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  pool.reserve(static_cast<std::size_t>(used));
  for (int w = 0; w < used; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = static_cast<std::size_t>(w); i < count;
           i += static_cast<std::size_t>(used))
        body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ccpde
