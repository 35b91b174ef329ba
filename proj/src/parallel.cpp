#include "fusionret/detail/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <vector>

namespace fusionret::detail {

std::size_t worker_count() {
  const char* env = std::getenv("FUSIONRET_THREADS");
  if (env == nullptr) return 1;
  std::size_t n = 0;
  const char* end = env + std::strlen(env);
  auto [ptr, ec] = std::from_chars(env, end, n);
  if (ec != std::errc{} || ptr != end || n == 0) return 1;
  return std::min<std::size_t>(n, 256);
}

void parallel_for_rows(std::size_t n,
                       const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1 || n < 64) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    pool.emplace_back(body, begin, std::min(n, begin + chunk));
  }
}

}  // namespace fusionret::detail
