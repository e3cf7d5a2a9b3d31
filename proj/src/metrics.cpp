#include "pacsr/metrics.hpp"

#include <array>
#include <cmath>

namespace pacsr {

namespace {

void check_pair(const Image& a, const Image& b, const char* op) {
  if (a.shape() != b.shape() || a.rank() != 3)
    throw ArgumentError(std::string(op) + ": images must share a (C,H,W) shape, got " + shape_str(a.shape()) +
                        " and " + shape_str(b.shape()));
}

void check_region(const Image& a, const ShadowMask* region, const char* op) {
  if (region && region->shape() != Shape{1, a.dim(1), a.dim(2)})
    throw ArgumentError(std::string(op) + ": region shape " + shape_str(region->shape()) +
                        " does not match image");
}

bool in_region(const ShadowMask* region, std::size_t pixel) { return !region || (*region)[pixel] > 0.5f; }

// Mean squared error over region pixels and all channels, on a 0..scale range.
double region_mse(const Image& a, const Image& b, const ShadowMask* region, double scale, const char* op) {
  check_pair(a, b, op);
  check_region(a, region, op);
  const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
  double sum = 0;
  std::size_t count = 0;
  for (int c = 0; c < a.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      if (!in_region(region, i)) continue;
      const double d = scale * (double(a[c * plane + i]) - double(b[c * plane + i]));
      sum += d * d;
      ++count;
    }
  if (count == 0) throw ArgumentError(std::string(op) + ": region is empty");
  return sum / static_cast<double>(count);
}

std::vector<double> luma(const Image& x) {
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> y(plane);
  if (x.dim(0) == 1) {
    for (std::size_t i = 0; i < plane; ++i) y[i] = x[i];
  } else if (x.dim(0) == 3) {
    for (std::size_t i = 0; i < plane; ++i)
      y[i] = 0.299 * x[i] + 0.587 * x[plane + i] + 0.114 * x[2 * plane + i];
  } else {
    throw ArgumentError("ssim: expected 1 or 3 channels");
  }
  return y;
}

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;

std::array<double, kWin> gaussian_taps() {
  std::array<double, kWin> g{};
  double total = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kHalf;
    g[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Separable "valid" Gaussian filter: (h, w) -> (h-10, w-10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w) {
  static const auto g = gaussian_taps();
  const int ho = h - 2 * kHalf, wo = w - 2 * kHalf;
  std::vector<double> tmp(static_cast<std::size_t>(h) * wo), out(static_cast<std::size_t>(ho) * wo);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0;
      for (int k = 0; k < kWin; ++k) s += g[k] * src[y * w + x + k];
      tmp[y * wo + x] = s;
    }
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0;
      for (int k = 0; k < kWin; ++k) s += g[k] * tmp[(y + k) * wo + x];
      out[y * wo + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, const ShadowMask* region) {
  const double mse = region_mse(a, b, region, 1.0, "psnr");
  if (mse < 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double rmse(const Image& a, const Image& b, const ShadowMask* region) {
  return std::sqrt(region_mse(a, b, region, 255.0, "rmse"));
}

double ssim(const Image& a, const Image& b, const ShadowMask* region) {
  check_pair(a, b, "ssim");
  check_region(a, region, "ssim");
  const int h = a.dim(1), w = a.dim(2);
  if (h < kWin || w < kWin)
    throw ArgumentError("ssim: images must be at least 11x11, got " + std::to_string(w) + "x" + std::to_string(h));
  const std::vector<double> la = luma(a), lb = luma(b);
  std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }
  const auto mu_a = filter_valid(la, h, w), mu_b = filter_valid(lb, h, w);
  const auto e_aa = filter_valid(aa, h, w), e_bb = filter_valid(bb, h, w), e_ab = filter_valid(ab, h, w);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int wo = w - 2 * kHalf;
  std::vector<double> map(mu_a.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    map[i] = ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  double sum = 0;
  std::size_t count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!in_region(region, static_cast<std::size_t>(y) * w + x)) continue;
      const int cy = std::clamp(y, kHalf, h - 1 - kHalf) - kHalf;
      const int cx = std::clamp(x, kHalf, w - 1 - kHalf) - kHalf;
      sum += map[cy * wo + cx];
      ++count;
    }
  if (count == 0) throw ArgumentError("ssim: region is empty");
  return sum / static_cast<double>(count);
}

RegionReport region_report(const Image& restored, const Image& target, const ShadowMask& m) {
  check_pair(restored, target, "region_report");
  check_region(restored, &m, "region_report");
  ShadowMask inverse(m.shape());
  bool has_fg = false, has_bg = false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool fg = m[i] > 0.5f;
    inverse[i] = fg ? 0.0f : 1.0f;
    has_fg = has_fg || fg;
    has_bg = has_bg || !fg;
  }
  if (!has_fg || !has_bg) throw ArgumentError("region_report: mask must contain both shadow and non-shadow pixels");
  auto eval = [&](const ShadowMask* r) {
    return RegionMetrics{psnr(restored, target, r), ssim(restored, target, r), rmse(restored, target, r)};
  };
  return {eval(&m), eval(&inverse), eval(nullptr)};
}

double mask_iou(const ShadowMask& pred, const ShadowMask& gt, double threshold) {
  if (pred.shape() != gt.shape()) throw ArgumentError("mask_iou: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred[i] > threshold;
    const bool g = gt[i] > 0.5f;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_bce(const ShadowMask& pred, const ShadowMask& gt) {
  if (pred.shape() != gt.shape()) throw ArgumentError("mask_bce: shape mismatch");
  constexpr double eps = 1e-7;
  double s = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double p = std::clamp(double(pred[i]), eps, 1.0 - eps);
    const double m = gt[i];
    s -= m * std::log(p) + (1.0 - m) * std::log(1.0 - p);
  }
  return s / static_cast<double>(gt.size());
}

void to_json(nlohmann::json& j, const RegionMetrics& m) {
  j = {{"psnr", m.psnr}, {"ssim", m.ssim}, {"rmse", m.rmse}};
}

void to_json(nlohmann::json& j, const RegionReport& r) {
  auto by_region = [&](double RegionMetrics::*field) {
    return nlohmann::json{{"shadow", r.shadow.*field}, {"non_shadow", r.non_shadow.*field}, {"all", r.all.*field}};
  };
  j = {{"psnr", by_region(&RegionMetrics::psnr)},
       {"ssim", by_region(&RegionMetrics::ssim)},
       {"rmse", by_region(&RegionMetrics::rmse)}};
}

}  // namespace pacsr
