#include "pacsr/distance_transform.hpp"

#include <climits>
#include <cmath>

namespace pacsr {

namespace {

void check_mask(const ShadowMask& m, const char* op) {
  if (m.rank() != 3 || m.dim(0) != 1) throw ArgumentError(std::string(op) + ": expected a (1,H,W) mask");
}

std::size_t count_fg(const ShadowMask& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(), [](float v) { return v > 0.5f; }));
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0) return std::hypot(p.x - a.x, p.y - a.y);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(a.x + t * dx - p.x, a.y + t * dy - p.y);
}

void dp_recurse(const std::vector<Point>& pts, std::size_t lo, std::size_t hi, double tol, std::vector<bool>& keep) {
  if (hi <= lo + 1) return;
  double worst = -1;
  std::size_t idx = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
    if (d > worst) {
      worst = d;
      idx = i;
    }
  }
  if (worst > tol) {
    keep[idx] = true;
    dp_recurse(pts, lo, idx, tol, keep);
    dp_recurse(pts, idx, hi, tol, keep);
  }
}

bool stroke_contained(const std::vector<Point>& line, const ShadowMask& allowed, const RasterStyle& style) {
  const ShadowMask r = rasterize(Prompt::line(line), allowed.dim(1), allowed.dim(2), style);
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0.5f && allowed[i] < 0.5f) return false;
  return true;
}

}  // namespace

std::vector<int> chamfer_distance(const ShadowMask& mask) {
  check_mask(mask, "chamfer_distance");
  const int h = mask.dim(1), w = mask.dim(2);
  constexpr int kInf = INT_MAX / 4;
  std::vector<int> d(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = mask[i] > 0.5f ? kInf : 0;
  auto at = [&](int y, int x) { return (y < 0 || y >= h || x < 0 || x >= w) ? 0 : d[y * w + x]; };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int& v = d[y * w + x];
      if (v == 0) continue;
      v = std::min({v, at(y, x - 1) + 3, at(y - 1, x - 1) + 4, at(y - 1, x) + 3, at(y - 1, x + 1) + 4});
    }
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x) {
      int& v = d[y * w + x];
      if (v == 0) continue;
      v = std::min({v, at(y, x + 1) + 3, at(y + 1, x + 1) + 4, at(y + 1, x) + 3, at(y + 1, x - 1) + 4});
    }
  return d;
}

Prompt derive_dot(const ShadowMask& subject_mask) {
  check_mask(subject_mask, "derive_dot");
  const std::vector<int> d = chamfer_distance(subject_mask);
  const int w = subject_mask.dim(2);
  int best = 0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > best) {
      best = d[i];
      arg = i;
    }
  if (best == 0) throw ArgumentError("derive_dot: mask is empty");
  return Prompt::dot({static_cast<int>(arg % w), static_cast<int>(arg / w)});
}

std::vector<Point> simplify_polyline(const std::vector<Point>& pts, double tolerance) {
  if (pts.size() <= 2) return pts;
  std::vector<bool> keep(pts.size(), false);
  keep.front() = keep.back() = true;
  dp_recurse(pts, 0, pts.size() - 1, tolerance, keep);
  std::vector<Point> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) out.push_back(pts[i]);
  return out;
}

ShadowMask dilate(const ShadowMask& mask, int radius) {
  check_mask(mask, "dilate");
  const int h = mask.dim(1), w = mask.dim(2);
  ShadowMask out(mask.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(0, y, x) < 0.5f) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) out.at(0, yy, xx) = 1.0f;
        }
    }
  return out;
}

Prompt derive_line(const ShadowMask& subject_mask, const LineTraceOptions& opts) {
  check_mask(subject_mask, "derive_line");
  if (count_fg(subject_mask) < 2) throw ArgumentError("derive_line: mask needs at least two pixels");
  const int h = subject_mask.dim(1), w = subject_mask.dim(2);
  const std::vector<int> d = chamfer_distance(subject_mask);
  const Point start = derive_dot(subject_mask).points[0];
  const double floor_depth = opts.stop_fraction * d[start.y * w + start.x];

  std::vector<char> visited(d.size(), 0);
  visited[start.y * w + start.x] = 1;
  auto idx = [w](const Point& p) { return static_cast<std::size_t>(p.y) * w + p.x; };

  // Greedy walk along the ridge. A candidate may not touch any visited pixel
  // other than the current one, which keeps the walk from folding back.
  auto walk = [&](int max_steps, int pdx, int pdy) {
    std::vector<Point> path;
    Point cur = start;
    while (static_cast<int>(path.size()) < max_steps) {
      bool found = false;
      Point best{};
      int best_d = -1, bdx = 0, bdy = 0;
      double best_align = -2.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          const Point q{cur.x + dx, cur.y + dy};
          if (q.x < 0 || q.x >= w || q.y < 0 || q.y >= h) continue;
          const std::size_t qi = idx(q);
          if (visited[qi] || d[qi] == 0 || d[qi] < floor_depth) continue;
          bool touches = false;
          for (int ey = -1; ey <= 1 && !touches; ++ey)
            for (int ex = -1; ex <= 1; ++ex) {
              const Point r{q.x + ex, q.y + ey};
              if ((!ex && !ey) || r == cur || r.x < 0 || r.x >= w || r.y < 0 || r.y >= h) continue;
              if (visited[idx(r)]) {
                touches = true;
                break;
              }
            }
          if (touches) continue;
          // Cosine to the previous step, so going straight beats a diagonal of equal depth.
          const double align = (dx * pdx + dy * pdy) / std::hypot(double(dx), double(dy));
          // Scan order is row-major, so strict comparisons keep the smallest row/column on ties.
          if (d[qi] > best_d || (d[qi] == best_d && align > best_align)) {
            best = q;
            best_d = d[qi];
            best_align = align;
            bdx = dx;
            bdy = dy;
            found = true;
          }
        }
      if (!found) break;
      path.push_back(best);
      visited[idx(best)] = 1;
      cur = best;
      pdx = bdx;
      pdy = bdy;
    }
    return path;
  };

  const int budget = std::max(1, opts.max_length - 1);
  const std::vector<Point> forward = walk((budget + 1) / 2, 0, 0);
  // The second walk heads away from the first.
  const int bx = forward.empty() ? 0 : start.x - forward[0].x, by = forward.empty() ? 0 : start.y - forward[0].y;
  const std::vector<Point> backward = walk(budget - static_cast<int>(forward.size()), bx, by);

  std::vector<Point> ridge(backward.rbegin(), backward.rend());
  ridge.push_back(start);
  ridge.insert(ridge.end(), forward.begin(), forward.end());
  if (ridge.size() == 1) return Prompt::line({start, start});

  const ShadowMask allowed = dilate(subject_mask, 1);
  while (ridge.size() >= 2) {
    double tol = opts.simplify_tolerance;
    std::vector<Point> line = simplify_polyline(ridge, tol);
    while (static_cast<int>(line.size()) > opts.max_vertices) {
      tol *= 1.5;
      line = simplify_polyline(ridge, tol);
    }
    if (stroke_contained(line, allowed, opts.style)) return Prompt::line(line);
    for (double t : {1.0, 0.5, 0.0}) {
      if (t >= tol) continue;
      line = simplify_polyline(ridge, t);
      if (static_cast<int>(line.size()) <= opts.max_vertices && stroke_contained(line, allowed, opts.style))
        return Prompt::line(line);
    }
    // Shorten the ridge from both ends and retry.
    ridge.erase(ridge.begin());
    if (ridge.size() > 2) ridge.pop_back();
  }
  return Prompt::line({start, start});
}

}  // namespace pacsr
