#include "pacsr/losses.hpp"

#include "pacsr/metrics.hpp"

namespace pacsr {

void LossConfig::validate() const {
  if (!(lambda_re > 0)) throw ArgumentError("lambda_re must be positive");
}

LossTerms loss_terms(const Image& restored, const Image& target, const ShadowMask& mask_pred,
                     const ShadowMask& mask_target, const LossConfig& cfg) {
  cfg.validate();
  if (restored.shape() != target.shape())
    throw ArgumentError("loss: image shapes differ " + shape_str(restored.shape()) + " vs " +
                        shape_str(target.shape()));
  if (mask_pred.shape() != mask_target.shape())
    throw ArgumentError("loss: mask shapes differ " + shape_str(mask_pred.shape()) + " vs " +
                        shape_str(mask_target.shape()));
  double mae = 0;
  for (std::size_t i = 0; i < target.size(); ++i) mae += std::abs(double(restored[i]) - double(target[i]));
  mae /= static_cast<double>(target.size());
  const double bce = mask_bce(mask_pred, mask_target);
  return {cfg.lambda_re * mae + bce, mae, bce};
}

double loss_total(const Image& restored, const Image& target, const ShadowMask& mask_pred,
                  const ShadowMask& mask_target, const LossConfig& cfg) {
  return loss_terms(restored, target, mask_pred, mask_target, cfg).total;
}

namespace ag {

template <typename T>
LossVars<T> loss_total(const Var<T>& restored, const Tensor<T>& target, const Var<T>& mask_pred,
                       const Tensor<T>& mask_target, const LossConfig& cfg) {
  cfg.validate();
  const Var<T> re = mean_abs_diff(restored, target);
  const Var<T> pr = bce_mean(mask_pred, mask_target);
  return {add(scale(re, static_cast<T>(cfg.lambda_re)), pr), re, pr};
}

template LossVars<float> loss_total<float>(const Var<float>&, const Tensor<float>&, const Var<float>&,
                                           const Tensor<float>&, const LossConfig&);
template LossVars<double> loss_total<double>(const Var<double>&, const Tensor<double>&, const Var<double>&,
                                             const Tensor<double>&, const LossConfig&);

}  // namespace ag
}  // namespace pacsr
