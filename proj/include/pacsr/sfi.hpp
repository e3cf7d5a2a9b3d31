#pragma once

#include "pacsr/layers.hpp"

namespace pacsr {

/// Spatial-frequency interaction block weights.
///   conv1: 3x3, C -> C     (spatial branch)
///   conv2: 1x1, 4C -> 4C   (acts on the stacked wavelet subbands)
///   conv3: 1x1, C -> C
///   agg:   3x3, 2C -> C    (fuses the inverse-transformed frequency branch with the spatial one)
template <typename T>
struct SFIParams {
  ConvLayer<T> conv1, conv2, conv3, agg;

  int channels() const { return conv1.out_channels(); }

  /// Throws DimensionError unless the four convolutions chain for `channels()`.
  void validate() const;

  static SFIParams zeros(int channels) {
    return {ConvLayer<T>::zeros(channels, channels, 3), ConvLayer<T>::zeros(4 * channels, 4 * channels, 1),
            ConvLayer<T>::zeros(channels, channels, 1), ConvLayer<T>::zeros(2 * channels, channels, 3)};
  }
};

/// t = agg(concat(idwt2(e + conv2(e)), f + conv3(conv1(f)))) with e = dwt2(f).
/// The spatial branch adds conv3(z) to the block input f itself.
template <typename T>
Tensor<T> sfi_forward(const Tensor<T>& f, const SFIParams<T>& p);

namespace ag {
/// Differentiable batched form on (N,C,H,W).
template <typename T>
Var<T> sfi(const Var<T>& f, const SFIParams<T>& p);
}  // namespace ag

}  // namespace pacsr
