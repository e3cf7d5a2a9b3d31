#include "pacsr/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "pacsr/distance_transform.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/image_io.hpp"

namespace pacsr {

std::string to_string(Background b) {
  switch (b) {
    case Background::gradient:
      return "gradient";
    case Background::noise:
      return "noise";
    case Background::flat:
      return "flat";
  }
  return "?";
}

Background parse_background(const std::string& s) {
  if (s == "gradient") return Background::gradient;
  if (s == "noise") return Background::noise;
  if (s == "flat") return Background::flat;
  throw ArgumentError("unknown background '" + s + "'");
}

void SceneConfig::validate() const {
  if (height < 16 || width < 16) throw ArgumentError("scene must be at least 16x16");
  if (min_subjects < 1 || max_subjects < min_subjects) throw ArgumentError("invalid subject count range");
  if (!(min_darkening > 0 && max_darkening < 1 && min_darkening <= max_darkening))
    throw ArgumentError("darkening range must lie inside (0,1)");
  if (shadow_blur_sigma < 0) throw ArgumentError("shadow blur sigma must be non-negative");
}

ShadowMask feather(const ShadowMask& shadow_mask, double sigma) {
  if (sigma <= 0) return shadow_mask;
  const int h = shadow_mask.dim(1), w = shadow_mask.dim(2);
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;

  std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * shadow_mask.at(0, y, xx);
      }
      tmp[y * w + x] = s;
    }
  ShadowMask out(shadow_mask.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[yy * w + x];
      }
      if (s < 1e-9) s = 0;
      if (s > 1 - 1e-9) s = 1;
      out.at(0, y, x) = static_cast<float>(s);
    }
  return out;
}

Image composite_shadows(const SampleRecord& record, int skip) {
  const Image& free = record.shadow_free_image;
  const int h = free.dim(1), w = free.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> factor(plane, 1.0);
  for (std::size_t k = 0; k < record.subjects.size(); ++k) {
    if (static_cast<int>(k) == skip) continue;
    const ShadowMask f = feather(record.subjects[k].shadow_mask, record.shadow_blur_sigma);
    const double a = record.subjects[k].darkening;
    for (std::size_t i = 0; i < plane; ++i)
      if (f[i] > 0) factor[i] *= 1.0 - (1.0 - a) * f[i];
  }
  Image out = free;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      if (factor[i] == 1.0) continue;
      const double level = std::lround(double(free[c * plane + i]) * 255.0);
      out[c * plane + i] = static_cast<float>(std::lround(level * factor[i])) / 255.0f;
    }
  return out;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Shape2D {
  bool ellipse = true;
  double cx = 0, cy = 0, rx = 1, ry = 1, angle = 0;
  std::vector<std::pair<double, double>> poly;  // convex polygon vertices (x, y)

  bool contains(double x, double y) const {
    if (ellipse) {
      const double c = std::cos(angle), s = std::sin(angle);
      const double u = ((x - cx) * c + (y - cy) * s) / rx;
      const double v = (-(x - cx) * s + (y - cy) * c) / ry;
      return u * u + v * v <= 1.0;
    }
    // Counter-clockwise convex polygon: inside when left of every edge.
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& [ax, ay] = poly[i];
      const auto& [bx, by] = poly[(i + 1) % poly.size()];
      if ((bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0) return false;
    }
    return true;
  }
};

Shape2D random_shape(Rng& rng, int h, int w) {
  const double base = std::min(h, w);
  Shape2D s;
  s.ellipse = uniform(rng, 0, 1) < 0.5;
  s.rx = uniform(rng, 0.08, 0.16) * base;
  s.ry = uniform(rng, 0.08, 0.16) * base;
  const double margin = std::max(s.rx, s.ry) + 2;
  s.cx = uniform(rng, margin, w - margin);
  s.cy = uniform(rng, margin, h - margin);
  s.angle = uniform(rng, 0, std::numbers::pi);
  if (!s.ellipse) {
    const int n = std::uniform_int_distribution<int>(5, 8)(rng);
    std::vector<double> angles(n);
    for (auto& a : angles) a = uniform(rng, 0, 2 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      const double c = std::cos(s.angle), sn = std::sin(s.angle);
      const double px = s.rx * std::cos(a), py = s.ry * std::sin(a);
      s.poly.emplace_back(s.cx + px * c - py * sn, s.cy + px * sn + py * c);
    }
  }
  return s;
}

ShadowMask render(const Shape2D& s, int h, int w) {
  ShadowMask m({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (s.contains(x, y)) m.at(0, y, x) = 1.0f;
  return m;
}

// Value noise with smoothstep interpolation over a few octaves.
std::vector<double> value_noise(Rng& rng, int h, int w) {
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  double amp = 1.0, total = 0;
  for (int cell = std::max(h, w) / 2; cell >= 4; cell /= 2) {
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (auto& g : grid) g = uniform(rng, 0, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fy = double(y) / cell, fx = double(x) / cell;
        const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
        double ty = fy - iy, tx = fx - ix;
        ty = ty * ty * (3 - 2 * ty);
        tx = tx * tx * (3 - 2 * tx);
        const double a = grid[iy * gw + ix], b = grid[iy * gw + ix + 1];
        const double c = grid[(iy + 1) * gw + ix], d = grid[(iy + 1) * gw + ix + 1];
        out[y * w + x] += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
      }
    total += amp;
    amp *= 0.5;
  }
  for (auto& v : out) v /= total;
  return out;
}

Image render_background(Rng& rng, const SceneConfig& cfg) {
  const int h = cfg.height, w = cfg.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Image img({3, h, w});
  double base[3], tint[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = uniform(rng, 0.45, 0.9);
    tint[c] = uniform(rng, -0.25, 0.25);
  }
  switch (cfg.background) {
    case Background::flat:
      for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) img[c * plane + i] = static_cast<float>(base[c]);
      break;
    case Background::gradient: {
      const double theta = uniform(rng, 0, 2 * std::numbers::pi);
      const double gx = std::cos(theta), gy = std::sin(theta);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double t = ((x - w / 2.0) * gx + (y - h / 2.0) * gy) / std::max(h, w);
          for (int c = 0; c < 3; ++c)
            img[c * plane + y * w + x] = static_cast<float>(std::clamp(base[c] + tint[c] * t * 2, 0.05, 1.0));
        }
      break;
    }
    case Background::noise: {
      const auto n = value_noise(rng, h, w);
      for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          img[c * plane + i] = static_cast<float>(std::clamp(base[c] + tint[c] * (n[i] - 0.5) * 2, 0.05, 1.0));
      break;
    }
  }
  return img;
}

bool overlaps(const ShadowMask& a, const ShadowMask& occupied) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > 0.5f && occupied[i] > 0.5f) return true;
  return false;
}

}  // namespace

SampleRecord synth_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int h = cfg.height, w = cfg.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  SampleRecord rec;
  rec.shadow_blur_sigma = cfg.shadow_blur_sigma;
  rec.shadow_free_image = render_background(rng, cfg);

  const int count = std::uniform_int_distribution<int>(cfg.min_subjects, cfg.max_subjects)(rng);
  // One light direction per scene; shadows fall away from it.
  const double light = uniform(rng, 0, 2 * std::numbers::pi);
  ShadowMask occupied({1, h, w});
  std::vector<std::array<double, 3>> colors;

  for (int k = 0; k < count; ++k) {
    SubjectRecord subj;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const Shape2D shape = random_shape(rng, h, w);
      const ShadowMask m = render(shape, h, w);
      if (std::count(m.values().begin(), m.values().end(), 1.0f) < 4) continue;
      if (overlaps(dilate(m, 2), occupied)) continue;

      const double size = std::max(shape.rx, shape.ry);
      const double dist = uniform(rng, 0.6, 1.2) * size;
      const double tx = dist * std::cos(light), ty = dist * std::sin(light);
      const double shear = uniform(rng, -0.5, 0.5);
      ShadowMask shadow({1, h, w});
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (m.at(0, y, x) > 0.5f) continue;
          // Inverse of p' = p + (shear * (y - cy), 0) + t.
          const double sy = y - ty;
          const double sx = x - tx - shear * (sy - shape.cy);
          if (shape.contains(sx, sy)) shadow.at(0, y, x) = 1.0f;
        }
      if (std::count(shadow.values().begin(), shadow.values().end(), 1.0f) == 0) continue;

      std::array<double, 3> color{};
      bool distinct = false;
      for (int tries = 0; tries < 50 && !distinct; ++tries) {
        for (auto& c : color) c = uniform(rng, 0.1, 0.95);
        distinct = std::all_of(colors.begin(), colors.end(), [&](const auto& o) {
          return std::abs(o[0] - color[0]) + std::abs(o[1] - color[1]) + std::abs(o[2] - color[2]) > 0.3;
        });
      }
      colors.push_back(color);
      for (std::size_t i = 0; i < plane; ++i)
        if (m[i] > 0.5f) {
          occupied[i] = 1.0f;
          for (int c = 0; c < 3; ++c) rec.shadow_free_image[c * plane + i] = static_cast<float>(color[c]);
        }
      subj.subject_mask = m;
      subj.shadow_mask = shadow;
      subj.darkening = uniform(rng, cfg.min_darkening, cfg.max_darkening);
      placed = true;
    }
    if (!placed) throw std::runtime_error("synth_scene: could not place subject " + std::to_string(k) +
                                          " after 100 attempts (seed " + std::to_string(cfg.seed) + ")");
    rec.subjects.push_back(std::move(subj));
  }

  rec.shadow_free_image = quantize_u8(rec.shadow_free_image);
  for (auto& subj : rec.subjects) {
    subj.dot = derive_dot(subj.subject_mask);
    subj.line = derive_line(subj.subject_mask);
    subj.mask_prompt = Prompt::subject_mask(subj.subject_mask);
  }
  rec.shadow_image = composite_shadows(rec);
  return rec;
}

}  // namespace pacsr
