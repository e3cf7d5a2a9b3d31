#include "pacsr/prompt.hpp"

#include <cmath>

namespace pacsr {

std::string to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::dot:
      return "dot";
    case PromptKind::line:
      return "line";
    case PromptKind::subject_mask:
      return "mask";
  }
  return "?";
}

PromptKind parse_prompt_kind(const std::string& s) {
  if (s == "dot") return PromptKind::dot;
  if (s == "line") return PromptKind::line;
  if (s == "mask" || s == "subject_mask") return PromptKind::subject_mask;
  throw ArgumentError("unknown prompt kind '" + s + "' (expected dot, line or mask)");
}

void Prompt::validate(int height, int width) const {
  auto check = [&](const Point& p) {
    if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
      throw ArgumentError("prompt coordinate (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                          ") lies outside the " + std::to_string(width) + "x" + std::to_string(height) +
                          " image");
  };
  switch (kind) {
    case PromptKind::dot:
      if (points.size() != 1) throw ArgumentError("dot prompt needs exactly one point");
      check(points[0]);
      break;
    case PromptKind::line:
      if (points.size() < 2) throw ArgumentError("line prompt needs at least two vertices");
      for (const auto& p : points) check(p);
      break;
    case PromptKind::subject_mask: {
      if (mask.shape() != Shape{1, height, width})
        throw ArgumentError("subject mask shape " + shape_str(mask.shape()) + " does not match image " +
                            shape_str({1, height, width}));
      bool any = false;
      for (float v : mask.values()) {
        if (v != 0.0f && v != 1.0f) throw ArgumentError("subject mask must be binary");
        any = any || v == 1.0f;
      }
      if (!any) throw ArgumentError("subject mask has no foreground pixel");
      break;
    }
  }
}

namespace {

double segment_distance_sq(double px, double py, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
  return ex * ex + ey * ey;
}

void stamp_segment(ShadowMask& m, const Point& a, const Point& b, double radius) {
  const int h = m.dim(1), w = m.dim(2);
  const int pad = static_cast<int>(std::ceil(radius));
  const int y0 = std::max(0, std::min(a.y, b.y) - pad), y1 = std::min(h - 1, std::max(a.y, b.y) + pad);
  const int x0 = std::max(0, std::min(a.x, b.x) - pad), x1 = std::min(w - 1, std::max(a.x, b.x) + pad);
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (segment_distance_sq(x, y, a, b) <= r2) m.at(0, y, x) = 1.0f;
}

}  // namespace

ShadowMask rasterize(const Prompt& prompt, int height, int width, const RasterStyle& style) {
  prompt.validate(height, width);
  ShadowMask out({1, height, width});
  switch (prompt.kind) {
    case PromptKind::dot:
      stamp_segment(out, prompt.points[0], prompt.points[0], style.dot_radius);
      break;
    case PromptKind::line:
      for (std::size_t i = 0; i + 1 < prompt.points.size(); ++i)
        stamp_segment(out, prompt.points[i], prompt.points[i + 1], style.line_width / 2.0);
      break;
    case PromptKind::subject_mask:
      out = prompt.mask;
      break;
  }
  return out;
}

Tensor<float> encode_input(const Image& x, const Prompt& prompt, const RasterStyle& style) {
  if (x.rank() != 3 || x.dim(0) != 3)
    throw ArgumentError("encode_input: expected a (3,H,W) image, got " + shape_str(x.shape()));
  const int h = x.dim(1), w = x.dim(2);
  const ShadowMask map = rasterize(prompt, h, w, style);
  Tensor<float> out({4, h, w});
  std::copy(x.values().begin(), x.values().end(), out.data());
  std::copy(map.values().begin(), map.values().end(), out.data() + x.size());
  return out;
}

}  // namespace pacsr
