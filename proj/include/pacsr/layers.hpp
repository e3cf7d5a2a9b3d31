#pragma once

#include "pacsr/autograd.hpp"

namespace pacsr {

/// Convolution weights (Cout,Cin,k,k) + bias (Cout); "same" padding of k/2.
template <typename T>
struct ConvLayer {
  ag::Var<T> weight;
  ag::Var<T> bias;
  int stride = 1;

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1); }
  int kernel() const { return weight.dim(2); }

  ag::Var<T> operator()(const ag::Var<T>& x) const {
    return ag::conv2d(x, weight, bias, stride, kernel() / 2);
  }

  static ConvLayer zeros(int cin, int cout, int k, int stride = 1) {
    return {ag::Var<T>(Tensor<T>({cout, cin, k, k})), ag::Var<T>(Tensor<T>({cout})), stride};
  }
};

/// Per-pixel channel normalisation with learnable gain and offset.
template <typename T>
struct NormLayer {
  ag::Var<T> gamma;
  ag::Var<T> beta;

  ag::Var<T> operator()(const ag::Var<T>& x) const { return ag::layer_norm_channels(x, gamma, beta); }

  static NormLayer identity(int channels) {
    return {ag::Var<T>(Tensor<T>({channels}, T(1))), ag::Var<T>(Tensor<T>({channels}))};
  }
};

/// Wraps a (C,H,W) map as a batch of one without gradient tracking.
template <typename T>
ag::Var<T> as_batch(const Tensor<T>& f) {
  if (f.rank() != 3) throw DimensionError("expected a (C,H,W) feature map, got " + shape_str(f.shape()));
  return ag::Var<T>(f.reshaped({1, f.dim(0), f.dim(1), f.dim(2)}));
}

/// Drops the leading batch axis of a single-item result.
template <typename T>
Tensor<T> unbatch(const ag::Var<T>& v) {
  const Shape& s = v.shape();
  return v.value().reshaped(Shape(s.begin() + 1, s.end()));
}

}  // namespace pacsr
