#include "pacsr/wavelet.hpp"

namespace pacsr {

namespace {

// One plane of size h x w into four planes of size h/2 x w/2.
template <typename T>
void haar_analysis(const T* x, int h, int w, T* ll, T* lh, T* hl, T* hh) {
  const int w2 = w / 2;
  for (int y = 0; y < h / 2; ++y)
    for (int x2 = 0; x2 < w2; ++x2) {
      const T a = x[(2 * y) * w + 2 * x2];
      const T b = x[(2 * y) * w + 2 * x2 + 1];
      const T c = x[(2 * y + 1) * w + 2 * x2];
      const T d = x[(2 * y + 1) * w + 2 * x2 + 1];
      const int o = y * w2 + x2;
      ll[o] = T(0.5) * (a + b + c + d);
      lh[o] = T(0.5) * (a + b - c - d);
      hl[o] = T(0.5) * (a - b + c - d);
      hh[o] = T(0.5) * (a - b - c + d);
    }
}

template <typename T>
void haar_synthesis(const T* ll, const T* lh, const T* hl, const T* hh, int h, int w, T* x) {
  const int w2 = w / 2;
  for (int y = 0; y < h / 2; ++y)
    for (int x2 = 0; x2 < w2; ++x2) {
      const int o = y * w2 + x2;
      const T s = ll[o], p = lh[o], q = hl[o], r = hh[o];
      x[(2 * y) * w + 2 * x2] = T(0.5) * (s + p + q + r);
      x[(2 * y) * w + 2 * x2 + 1] = T(0.5) * (s + p - q - r);
      x[(2 * y + 1) * w + 2 * x2] = T(0.5) * (s - p + q - r);
      x[(2 * y + 1) * w + 2 * x2 + 1] = T(0.5) * (s - p - q + r);
    }
}

// Batched layout helpers: x is (N,C,H,W), coeffs is (N,4C,H/2,W/2).
template <typename T>
void analysis_batched(const T* x, int batch, int ch, int h, int w, T* coeffs) {
  const std::size_t full = static_cast<std::size_t>(h) * w, half = full / 4;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      T* base = coeffs + static_cast<std::size_t>(n) * 4 * ch * half;
      haar_analysis(x + (static_cast<std::size_t>(n) * ch + c) * full, h, w, base + c * half,
                    base + (ch + c) * half, base + (2 * ch + c) * half, base + (3 * ch + c) * half);
    }
}

template <typename T>
void synthesis_batched(const T* coeffs, int batch, int ch, int h, int w, T* x) {
  const std::size_t full = static_cast<std::size_t>(h) * w, half = full / 4;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      const T* base = coeffs + static_cast<std::size_t>(n) * 4 * ch * half;
      haar_synthesis(base + c * half, base + (ch + c) * half, base + (2 * ch + c) * half,
                     base + (3 * ch + c) * half, h, w, x + (static_cast<std::size_t>(n) * ch + c) * full);
    }
}

}  // namespace

template <typename T>
WaveletCoeffs<T> dwt2(const Tensor<T>& f) {
  if (f.rank() != 3) throw DimensionError("dwt2: expected a (C,H,W) map, got " + shape_str(f.shape()));
  const int ch = f.dim(0), h = f.dim(1), w = f.dim(2);
  if (h < 2 || w < 2 || h % 2 || w % 2)
    throw DimensionError("dwt2: height and width must be even and >= 2, got " + shape_str(f.shape()));
  WaveletCoeffs<T> out{Tensor<T>({ch, h / 2, w / 2}), Tensor<T>({ch, h / 2, w / 2}),
                       Tensor<T>({ch, h / 2, w / 2}), Tensor<T>({ch, h / 2, w / 2})};
  const std::size_t full = static_cast<std::size_t>(h) * w, half = full / 4;
  for (int c = 0; c < ch; ++c)
    haar_analysis(f.data() + c * full, h, w, out.ll.data() + c * half, out.lh.data() + c * half,
                  out.hl.data() + c * half, out.hh.data() + c * half);
  return out;
}

template <typename T>
Tensor<T> idwt2(const WaveletCoeffs<T>& w) {
  const Shape& s = w.ll.shape();
  if (s.size() != 3 || w.lh.shape() != s || w.hl.shape() != s || w.hh.shape() != s)
    throw DimensionError("idwt2: subbands must share one (C,H/2,W/2) shape");
  const int ch = s[0], h = 2 * s[1], wd = 2 * s[2];
  Tensor<T> out({ch, h, wd});
  const std::size_t full = static_cast<std::size_t>(h) * wd, half = full / 4;
  for (int c = 0; c < ch; ++c)
    haar_synthesis(w.ll.data() + c * half, w.lh.data() + c * half, w.hl.data() + c * half,
                   w.hh.data() + c * half, h, wd, out.data() + c * full);
  return out;
}

namespace ag {

template <typename T>
Var<T> dwt2(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[2] % 2 || s[3] % 2 || s[2] < 2 || s[3] < 2)
    throw DimensionError("dwt2: expected (N,C,H,W) with even H, W; got " + shape_str(s));
  const int batch = s[0], ch = s[1], h = s[2], w = s[3];
  Tensor<T> out({batch, 4 * ch, h / 2, w / 2});
  analysis_batched(x.value().data(), batch, ch, h, w, out.data());
  return make_op<T>(std::move(out), {x}, [=](Node<T>& n) {
    Tensor<T> g({batch, ch, h, w});
    synthesis_batched(n.grad.data(), batch, ch, h, w, g.data());
    auto& dst = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

template <typename T>
Var<T> idwt2(const Var<T>& coeffs) {
  const Shape& s = coeffs.shape();
  if (s.size() != 4 || s[1] % 4)
    throw DimensionError("idwt2: expected (N,4C,H/2,W/2); got " + shape_str(s));
  const int batch = s[0], ch = s[1] / 4, h = 2 * s[2], w = 2 * s[3];
  Tensor<T> out({batch, ch, h, w});
  synthesis_batched(coeffs.value().data(), batch, ch, h, w, out.data());
  return make_op<T>(std::move(out), {coeffs}, [=](Node<T>& n) {
    Tensor<T> g({batch, 4 * ch, h / 2, w / 2});
    analysis_batched(n.grad.data(), batch, ch, h, w, g.data());
    auto& dst = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

template Var<float> dwt2<float>(const Var<float>&);
template Var<double> dwt2<double>(const Var<double>&);
template Var<float> idwt2<float>(const Var<float>&);
template Var<double> idwt2<double>(const Var<double>&);

}  // namespace ag

template WaveletCoeffs<float> dwt2<float>(const Tensor<float>&);
template WaveletCoeffs<double> dwt2<double>(const Tensor<double>&);
template Tensor<float> idwt2<float>(const WaveletCoeffs<float>&);
template Tensor<double> idwt2<double>(const WaveletCoeffs<double>&);

}  // namespace pacsr
