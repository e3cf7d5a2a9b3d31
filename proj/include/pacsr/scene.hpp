#pragma once

#include <cstdint>
#include <vector>

#include "pacsr/prompt.hpp"

namespace pacsr {

enum class Background { gradient, noise, flat };

std::string to_string(Background b);
Background parse_background(const std::string& s);

struct SceneConfig {
  int height = 256;
  int width = 256;
  int min_subjects = 2;
  int max_subjects = 4;
  double min_darkening = 0.35;  // multiplicative factor inside a shadow core
  double max_darkening = 0.65;
  double shadow_blur_sigma = 2.0;
  Background background = Background::gradient;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SubjectRecord {
  ShadowMask subject_mask;  // binary (1,H,W)
  ShadowMask shadow_mask;   // binary (1,H,W): the hard silhouette of the cast shadow
  Prompt dot;
  Prompt line;
  Prompt mask_prompt;
  double darkening = 1.0;   // factor applied where the feathered shadow is fully opaque
};

/// One synthetic scene. All images hold exact k/255 values so they survive 8-bit PNG storage.
struct SampleRecord {
  Image shadow_image;
  Image shadow_free_image;
  std::vector<SubjectRecord> subjects;
  double shadow_blur_sigma = 0;
};

/// Gaussian-feathered version of a binary shadow mask, in [0,1]. The kernel is
/// cut at 3 sigma so the feather has finite support; values within 1e-9 of 0 or 1 are snapped.
ShadowMask feather(const ShadowMask& shadow_mask, double sigma);

/// Composites the shadow layers of every subject except `skip` (pass -1 for all)
/// onto the shadow-free image, rounding to 8-bit values.
Image composite_shadows(const SampleRecord& record, int skip = -1);

/// Renders a scene: background, flat-coloured subjects, one sheared/offset
/// silhouette shadow per subject (excluding its own pixels), multiplicative
/// feathered darkening. Deterministic in cfg.seed.
SampleRecord synth_scene(const SceneConfig& cfg);

}  // namespace pacsr
