#pragma once

#include "pacsr/autograd.hpp"
#include "pacsr/tensor.hpp"

namespace pacsr {

/// Single-level orthonormal Haar subbands of a (C,H,W) map, each (C,H/2,W/2).
///
/// For a 2x2 block [[a,b],[c,d]]:
///   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
/// The transform matrix is symmetric and orthogonal, so it is its own inverse.
template <typename T>
struct WaveletCoeffs {
  Tensor<T> ll, lh, hl, hh;
};

/// Forward transform. Throws DimensionError on odd height or width; never pads.
template <typename T>
WaveletCoeffs<T> dwt2(const Tensor<T>& f);

/// Perfect-reconstruction inverse of dwt2.
template <typename T>
Tensor<T> idwt2(const WaveletCoeffs<T>& w);

namespace ag {

/// Batched forward transform (N,C,H,W) -> (N,4C,H/2,W/2), subbands stacked as
/// channel blocks [ll | lh | hl | hh].
template <typename T>
Var<T> dwt2(const Var<T>& x);

/// Inverse of ag::dwt2.
template <typename T>
Var<T> idwt2(const Var<T>& coeffs);

}  // namespace ag
}  // namespace pacsr
