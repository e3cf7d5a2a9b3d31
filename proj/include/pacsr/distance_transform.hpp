#pragma once

#include <vector>

#include "pacsr/prompt.hpp"

namespace pacsr {

/// Two-pass 3-4 chamfer distance of every foreground pixel to the nearest
/// background pixel (pixels outside the image count as background). Row-major
/// (H*W), zero on background. One orthogonal step costs 3, a diagonal step 4.
std::vector<int> chamfer_distance(const ShadowMask& mask);

/// Deepest interior point of the mask under the chamfer metric; ties go to the
/// smallest row, then the smallest column. Throws ArgumentError on an empty mask.
Prompt derive_dot(const ShadowMask& subject_mask);

struct LineTraceOptions {
  double stop_fraction = 0.25;  // stop once the ridge falls below this share of the start depth
  int max_length = 64;          // pixels in the traced ridge, both directions together
  int max_vertices = 8;
  double simplify_tolerance = 1.5;
  RasterStyle style;            // stroke used for the containment check
};

/// Ridge-following polyline through derive_dot. Every vertex lies inside the
/// mask and the rasterized stroke stays within the mask dilated by one pixel.
/// Throws ArgumentError on masks with fewer than two pixels.
Prompt derive_line(const ShadowMask& subject_mask, const LineTraceOptions& opts = {});

/// Douglas-Peucker simplification keeping both endpoints.
std::vector<Point> simplify_polyline(const std::vector<Point>& pts, double tolerance);

/// 8-neighbour binary dilation by `radius` pixels.
ShadowMask dilate(const ShadowMask& mask, int radius = 1);

}  // namespace pacsr
