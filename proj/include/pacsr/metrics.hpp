#pragma once

#include <json.hpp>

#include "pacsr/prompt.hpp"

namespace pacsr {

/// PSNR with peak 1.0 over the pixels of `region` (all pixels when null).
/// Returns 100 when the mean squared error is below 1e-10.
double psnr(const Image& a, const Image& b, const ShadowMask* region = nullptr);

/// Mean SSIM on luma (0.299R + 0.587G + 0.114B) with an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. Windows are centred on
/// pixels at least 5 px from the border; every pixel takes the SSIM of the
/// window centred at its position clamped into that interior, and the result
/// is the mean over region pixels. Images must be at least 11x11.
double ssim(const Image& a, const Image& b, const ShadowMask* region = nullptr);

/// Root mean squared error on the 0-255 scale.
double rmse(const Image& a, const Image& b, const ShadowMask* region = nullptr);

struct RegionMetrics {
  double psnr = 0, ssim = 0, rmse = 0;
};

struct RegionReport {
  RegionMetrics shadow, non_shadow, all;
};

/// Metrics over {m = 1}, {m = 0} and all pixels. m must contain both classes.
RegionReport region_report(const Image& restored, const Image& target, const ShadowMask& m);

/// |(pred > threshold) & gt| / |(pred > threshold) | gt|; 1 when both are empty.
double mask_iou(const ShadowMask& pred, const ShadowMask& gt, double threshold = 0.5);

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double mask_bce(const ShadowMask& pred, const ShadowMask& gt);

void to_json(nlohmann::json& j, const RegionMetrics& m);
/// Keyed metric first, then region: {"psnr": {"shadow", "non_shadow", "all"}, ...}.
void to_json(nlohmann::json& j, const RegionReport& r);

}  // namespace pacsr
