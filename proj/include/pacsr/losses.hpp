#pragma once

#include "pacsr/autograd.hpp"
#include "pacsr/prompt.hpp"

namespace pacsr {

struct LossConfig {
  double lambda_re = 3.0;  // weight of the reconstruction term
  void validate() const;
};

struct LossTerms {
  double total = 0;
  double reconstruction = 0;  // mean absolute error of the restored image
  double prediction = 0;      // mean clamped BCE of the predicted mask
};

/// lambda * MAE(restored, target) + BCE(mask_pred, mask_target).
LossTerms loss_terms(const Image& restored, const Image& target, const ShadowMask& mask_pred,
                     const ShadowMask& mask_target, const LossConfig& cfg);

double loss_total(const Image& restored, const Image& target, const ShadowMask& mask_pred,
                  const ShadowMask& mask_target, const LossConfig& cfg);

namespace ag {

template <typename T>
struct LossVars {
  Var<T> total, reconstruction, prediction;
};

template <typename T>
LossVars<T> loss_total(const Var<T>& restored, const Tensor<T>& target, const Var<T>& mask_pred,
                       const Tensor<T>& mask_target, const LossConfig& cfg);

}  // namespace ag
}  // namespace pacsr
