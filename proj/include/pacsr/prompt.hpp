#pragma once

#include <string>
#include <vector>

#include "pacsr/tensor.hpp"

namespace pacsr {

/// RGB image (3,H,W) with values in [0,1].
using Image = Tensor<float>;
/// Single-channel map (1,H,W); binary for ground truth, soft in (0,1) for predictions.
using ShadowMask = Tensor<float>;

struct Point {
  int x = 0;  // column
  int y = 0;  // row
  friend bool operator==(const Point&, const Point&) = default;
};

enum class PromptKind { dot, line, subject_mask };

std::string to_string(PromptKind kind);
/// Accepts "dot", "line", "mask" and "subject_mask".
PromptKind parse_prompt_kind(const std::string& s);

/// A user hint naming one subject: a dot, a polyline, or the subject's binary mask.
struct Prompt {
  PromptKind kind = PromptKind::dot;
  std::vector<Point> points;  // one for dot, >= 2 for line
  ShadowMask mask;            // (1,H,W) for subject_mask

  static Prompt dot(Point p) { return {PromptKind::dot, {p}, {}}; }
  static Prompt line(std::vector<Point> pts) { return {PromptKind::line, std::move(pts), {}}; }
  static Prompt subject_mask(ShadowMask m) { return {PromptKind::subject_mask, {}, std::move(m)}; }

  /// Throws ArgumentError when the prompt is malformed for an H x W image.
  void validate(int height, int width) const;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// Stroke geometry in pixels. Dots are filled disks, lines are round-capped strokes.
struct RasterStyle {
  double dot_radius = 5.0;
  double line_width = 3.0;
};

/// Binary prompt map (1,H,W).
ShadowMask rasterize(const Prompt& prompt, int height, int width, const RasterStyle& style = {});

/// The 3 image channels followed by the rasterized prompt: (4,H,W).
Tensor<float> encode_input(const Image& x, const Prompt& prompt, const RasterStyle& style = {});

}  // namespace pacsr
