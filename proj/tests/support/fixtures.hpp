#pragma once

#include "fusionret/matrix.hpp"

namespace fixtures {

// Complementary pair: `left` ranks queries 0 and 1 correctly with margin 0.6
// and misses 2 and 3 by 0.1; `right` is the mirror image. Each alone has
// R@1 = 0.5; w * left + (1 - w) * right is perfect for w in (1/7, 6/7).
inline fusionret::Matrix complementary_left() {
  return {{1.0, 0.4, 0.0, 0.0},
          {0.4, 1.0, 0.0, 0.0},
          {0.0, 0.0, 0.4, 0.5},
          {0.0, 0.0, 0.5, 0.4}};
}

inline fusionret::Matrix complementary_right() {
  return {{0.4, 0.5, 0.0, 0.0},
          {0.5, 0.4, 0.0, 0.0},
          {0.0, 0.0, 1.0, 0.4},
          {0.0, 0.0, 0.4, 1.0}};
}

}  // namespace fixtures
