#pragma once

#include <cstddef>
#include <functional>

namespace fusionret::detail {

/// Worker count from FUSIONRET_THREADS (default 1, clamped to [1, 256]).
std::size_t worker_count();

/// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on each.
/// Callers write to disjoint output rows only, so results do not depend on
/// the thread count.
void parallel_for_rows(std::size_t n,
                       const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace fusionret::detail
