#pragma once

// Brute-force geometry references for prompt derivation.

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacsr/prompt.hpp"

namespace oracle {

// Exact Euclidean distance from a foreground pixel to the nearest background
// pixel, where everything outside the image counts as background.
inline double exact_depth(const pacsr::ShadowMask& m, int y, int x) {
  const int h = m.dim(1), w = m.dim(2);
  double best = std::min({y + 1, x + 1, h - y, w - x});
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      if (m.at(0, yy, xx) < 0.5f) best = std::min(best, std::hypot(double(yy - y), double(xx - x)));
  return best;
}

struct Deepest {
  int x = -1, y = -1;
  double depth = 0;
};

// Row-major scan keeps the first maximum: smallest row, then smallest column.
inline Deepest deepest_point(const pacsr::ShadowMask& m) {
  Deepest d;
  for (int y = 0; y < m.dim(1); ++y)
    for (int x = 0; x < m.dim(2); ++x)
      if (m.at(0, y, x) > 0.5f) {
        const double v = exact_depth(m, y, x);
        if (v > d.depth) d = {x, y, v};
      }
  return d;
}

}  // namespace oracle
