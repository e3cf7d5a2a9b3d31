#include "pacsr/autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <unordered_set>

namespace pacsr::ag {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using CArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
void accumulate(Node<T>& parent, const Tensor<T>& g) {
  if (!parent.requires_grad) return;
  auto& dst = parent.grad_ref();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <typename T>
void im2col(const T* x, int cin, int h, int w, int k, int stride, int pad, int ho, int wo, T* col) {
  const int l = ho * wo;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * l;
        const T* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* out = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            // ix = ox - pad + kx is valid for ox in [lo, hi).
            const int lo = std::clamp(pad - kx, 0, wo), hi = std::clamp(w + pad - kx, lo, wo);
            std::fill(out, out + lo, T(0));
            std::copy(src + lo - pad + kx, src + hi - pad + kx, out + lo);
            std::fill(out + hi, out + wo, T(0));
            continue;
          }
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im(const T* col, int cin, int h, int w, int k, int stride, int pad, int ho, int wo, T* x) {
  const int l = ho * wo;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * l;
        T* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const T* in = row + oy * wo;
          if (stride == 1) {
            const int lo = std::clamp(pad - kx, 0, wo), hi = std::clamp(w + pad - kx, lo, wo);
            T* d = dst - pad + kx;
            for (int ox = lo; ox < hi; ++ox) d[ox] += in[ox];
            continue;
          }
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += in[ox];
          }
        }
      }
}

}  // namespace

template <typename T>
void backward(const Var<T>& root) {
  if (!root.requires_grad()) return;
  if (root.value().size() != 1) throw DimensionError("backward: root must be a scalar");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_ref()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      auto& g = n.parents[1]->grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    Node<T>& pa = *n.parents[0];
    Node<T>& pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_ref();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  Tensor<T> out(a.shape());
  const auto x = CArrMap<T>(a.value().data(), a.value().size());
  ArrMap<T>(out.data(), out.size()) = T(0.5) * x * (T(1) + (c * (x + T(0.044715) * x.cube())).tanh());
  return make_op<T>(std::move(out), {a}, [c](Node<T>& n) {
    Node<T>& p = *n.parents[0];
    auto& g = p.grad_ref();
    const auto x = CArrMap<T>(p.value.data(), p.value.size());
    const Eigen::Array<T, Eigen::Dynamic, 1> th = (c * (x + T(0.044715) * x.cube())).tanh();
    ArrMap<T>(g.data(), g.size()) +=
        CArrMap<T>(n.grad.data(), n.grad.size()) *
        (T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th.square()) * c * (T(1) + T(3 * 0.044715) * x.square()));
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = n.value[i];
      g[i] += n.grad[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::clamp(v, lo, hi);
  return make_op<T>(std::move(out), {a}, [lo, hi](Node<T>& n) {
    Node<T>& p = *n.parents[0];
    auto& g = p.grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] > lo && p.value[i] < hi) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> out = a.value().reshaped(std::move(s));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) { accumulate(*n.parents[0], n.grad); });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sa.size() != sb.size() || sa[0] != sb[0] ||
      !std::equal(sa.begin() + 2, sa.end(), sb.begin() + 2))
    throw DimensionError("concat_channels: incompatible shapes " + shape_str(sa) + " and " +
                         shape_str(sb));
  const std::size_t inner = shape_numel(Shape(sa.begin() + 2, sa.end()));
  const std::size_t na = sa[1] * inner, nb = sb[1] * inner;
  Shape so = sa;
  so[1] = sa[1] + sb[1];
  Tensor<T> out(so);
  for (int n = 0; n < sa[0]; ++n) {
    std::copy_n(a.value().data() + n * na, na, out.data() + n * (na + nb));
    std::copy_n(b.value().data() + n * nb, nb, out.data() + n * (na + nb) + na);
  }
  return make_op<T>(std::move(out), {a, b}, [na, nb](Node<T>& n) {
    const int batch = n.value.dim(0);
    for (int k = 0; k < 2; ++k) {
      Node<T>& p = *n.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_ref();
      const std::size_t len = k == 0 ? na : nb;
      const std::size_t off = k == 0 ? 0 : na;
      for (int i = 0; i < batch; ++i) {
        const T* src = n.grad.data() + i * (na + nb) + off;
        T* dst = g.data() + i * len;
        for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 4 || sw.size() != 4 || sw[2] != sw[3])
    throw DimensionError("conv2d: expected x (N,C,H,W) and w (Cout,Cin,k,k), got " + shape_str(sx) +
                         " and " + shape_str(sw));
  if (sx[1] != sw[1])
    throw DimensionError("conv2d: input has " + std::to_string(sx[1]) + " channels, weights expect " +
                         std::to_string(sw[1]));
  if (b.defined() && (b.value().size() != static_cast<std::size_t>(sw[0])))
    throw DimensionError("conv2d: bias size does not match output channels");
  const int batch = sx[0], cin = sx[1], h = sx[2], wd = sx[3];
  const int cout = sw[0], k = sw[2];
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw DimensionError("conv2d: input too small for kernel");
  const int kk = cin * k * k;
  const int l = ho * wo;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);

  Tensor<T> out({batch, cout, ho, wo});
  CMapMat<T> wm(w.value().data(), cout, kk);
  AlignedVector<T> col(pointwise ? 0 : static_cast<std::size_t>(kk) * l);
  for (int n = 0; n < batch; ++n) {
    const T* xn = x.value().data() + static_cast<std::size_t>(n) * cin * h * wd;
    MapMat<T> ym(out.data() + static_cast<std::size_t>(n) * cout * l, cout, l);
    if (pointwise) {
      ym.noalias() = wm * CMapMat<T>(xn, kk, l);
    } else {
      im2col(xn, cin, h, wd, k, stride, pad, ho, wo, col.data());
      ym.noalias() = wm * CMapMat<T>(col.data(), kk, l);
    }
    if (b.defined())
      for (int c = 0; c < cout; ++c) ym.row(c).array() += b.value()[c];
  }

  std::vector<Var<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  const bool has_bias = b.defined();
  return make_op<T>(std::move(out), std::move(parents),
                    [=](Node<T>& node) {
                      Node<T>& px = *node.parents[0];
                      Node<T>& pw = *node.parents[1];
                      Node<T>* pb = has_bias ? node.parents[2].get() : nullptr;
                      CMapMat<T> wmat(pw.value.data(), cout, kk);
                      AlignedVector<T> colbuf(pointwise ? 0 : static_cast<std::size_t>(kk) * l);
                      AlignedVector<T> dcol(pointwise ? 0 : static_cast<std::size_t>(kk) * l);
                      for (int n = 0; n < batch; ++n) {
                        CMapMat<T> dy(node.grad.data() + static_cast<std::size_t>(n) * cout * l, cout, l);
                        const T* xn = px.value.data() + static_cast<std::size_t>(n) * cin * h * wd;
                        if (pw.requires_grad) {
                          MapMat<T> dw(pw.grad_ref().data(), cout, kk);
                          if (pointwise) {
                            dw.noalias() += dy * CMapMat<T>(xn, kk, l).transpose();
                          } else {
                            im2col(xn, cin, h, wd, k, stride, pad, ho, wo, colbuf.data());
                            dw.noalias() += dy * CMapMat<T>(colbuf.data(), kk, l).transpose();
                          }
                        }
                        if (pb && pb->requires_grad) {
                          auto& db = pb->grad_ref();
                          for (int c = 0; c < cout; ++c) db[c] += dy.row(c).sum();
                        }
                        if (px.requires_grad) {
                          T* dxn = px.grad_ref().data() + static_cast<std::size_t>(n) * cin * h * wd;
                          if (pointwise) {
                            MapMat<T>(dxn, kk, l).noalias() += wmat.transpose() * dy;
                          } else {
                            MapMat<T>(dcol.data(), kk, l).noalias() = wmat.transpose() * dy;
                            col2im(dcol.data(), cin, h, wd, k, stride, pad, ho, wo, dxn);
                          }
                        }
                      }
                    });
}

template <typename T>
Var<T> upsample2x(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("upsample2x: expected (N,C,H,W)");
  const int planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor<T> out({s[0], s[1], 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    const T* src = x.value().data() + static_cast<std::size_t>(p) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
  }
  return make_op<T>(std::move(out), {x}, [planes, h, w](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (int p = 0; p < planes; ++p) {
      const T* src = n.grad.data() + static_cast<std::size_t>(p) * 4 * h * w;
      T* dst = g.data() + static_cast<std::size_t>(p) * h * w;
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
    }
  });
}

template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("layer_norm_channels: expected (N,C,...)");
  const int batch = s[0], ch = s[1];
  const int l = static_cast<int>(shape_numel(Shape(s.begin() + 2, s.end())));
  if (gamma.value().size() != static_cast<std::size_t>(ch) || beta.value().size() != static_cast<std::size_t>(ch))
    throw DimensionError("layer_norm_channels: affine parameters must have C entries");

  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<Arr>;
  using CMap = Eigen::Map<const Arr>;
  using ColVec = Eigen::Array<T, Eigen::Dynamic, 1>;

  Tensor<T> out(s);
  auto xhat = std::make_shared<AlignedVector<T>>(x.value().size());
  auto inv_std = std::make_shared<AlignedVector<T>>(static_cast<std::size_t>(batch) * l);
  const auto gm = Eigen::Map<const ColVec>(gamma.value().data(), ch);
  const auto bm = Eigen::Map<const ColVec>(beta.value().data(), ch);
  for (int n = 0; n < batch; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * ch * l;
    const CMap xm(x.value().data() + base, ch, l);
    Map xh(xhat->data() + base, ch, l);
    auto is = Eigen::Map<Eigen::Array<T, 1, Eigen::Dynamic>>(inv_std->data() + static_cast<std::size_t>(n) * l, l);
    const Eigen::Array<T, 1, Eigen::Dynamic> mean = xm.colwise().sum() / T(ch);
    xh = xm.rowwise() - mean;
    // Packet rsqrt is an approximation refined differently from the scalar tail.
    is = T(1) / ((xh.square().colwise().sum() / T(ch)) + eps).sqrt();
    xh.rowwise() *= is;
    Map(out.data() + base, ch, l) = (xh.colwise() * gm).colwise() + bm;
  }
  return make_op<T>(std::move(out), {x, gamma, beta}, [=](Node<T>& node) {
    Node<T>& px = *node.parents[0];
    Node<T>& pg = *node.parents[1];
    Node<T>& pbeta = *node.parents[2];
    const auto gv = Eigen::Map<const ColVec>(pg.value.data(), ch);
    Arr dxh(ch, l);
    for (int n = 0; n < batch; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * ch * l;
      const CMap dy(node.grad.data() + base, ch, l);
      const CMap xh(xhat->data() + base, ch, l);
      if (pg.requires_grad) Eigen::Map<ColVec>(pg.grad_ref().data(), ch) += (dy * xh).rowwise().sum();
      if (pbeta.requires_grad) Eigen::Map<ColVec>(pbeta.grad_ref().data(), ch) += dy.rowwise().sum();
      if (!px.requires_grad) continue;
      dxh = dy.colwise() * gv;
      const Eigen::Array<T, 1, Eigen::Dynamic> mean_d = dxh.colwise().sum() / T(ch);
      const Eigen::Array<T, 1, Eigen::Dynamic> mean_dx = (dxh * xh).colwise().sum() / T(ch);
      const auto is = Eigen::Map<const Eigen::Array<T, 1, Eigen::Dynamic>>(inv_std->data() + static_cast<std::size_t>(n) * l, l);
      Map g(px.grad_ref().data() + base, ch, l);
      g += ((dxh.rowwise() - mean_d) - xh.rowwise() * mean_dx).rowwise() * is;
    }
  });
}

template <typename T>
Var<T> gather_pixels(const Var<T>& x, const std::vector<std::int64_t>& index) {
  const Shape& s = x.shape();
  if (s.size() < 3) throw DimensionError("gather_pixels: expected (N,C,...)");
  const int batch = s[0], ch = s[1];
  const std::size_t l = shape_numel(Shape(s.begin() + 2, s.end()));
  if (index.size() != l) throw DimensionError("gather_pixels: index length does not match pixel count");
  Tensor<T> out({batch, ch, static_cast<int>(l)});
  const std::size_t planes = static_cast<std::size_t>(batch) * ch;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.value().data() + p * l;
    T* dst = out.data() + p * l;
    for (std::size_t i = 0; i < l; ++i) dst[i] = src[index[i]];
  }
  return make_op<T>(std::move(out), {x}, [index, planes, l](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = n.grad.data() + p * l;
      T* dst = g.data() + p * l;
      for (std::size_t i = 0; i < l; ++i) dst[index[i]] += src[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  return make_op<T>(Tensor<T>({1}, s), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (auto& v : g.values()) v += n.grad[0];
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& a, const Tensor<T>& weights) {
  if (weights.size() != a.value().size()) throw DimensionError("weighted_sum: size mismatch");
  T s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += a.value()[i] * weights[i];
  return make_op<T>(Tensor<T>({1}, s), {a}, [weights](Node<T>& n) {
    auto& g = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0] * weights[i];
  });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) throw DimensionError("mean_abs_diff: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(double(pred.value()[i]) - double(target[i]));
  const T inv = T(1) / static_cast<T>(target.size());
  return make_op<T>(Tensor<T>({1}, static_cast<T>(s / target.size())), {pred}, [target, inv](Node<T>& n) {
    Node<T>& p = *n.parents[0];
    auto& g = p.grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T d = p.value[i] - target[i];
      g[i] += n.grad[0] * inv * (d > 0 ? T(1) : (d < 0 ? T(-1) : T(0)));
    }
  });
}

template <typename T>
Var<T> bce_mean(const Var<T>& prob, const Tensor<T>& target, double eps) {
  if (prob.shape() != target.shape()) throw DimensionError("bce_mean: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p = std::clamp(double(prob.value()[i]), eps, 1.0 - eps);
    const double m = target[i];
    s -= m * std::log(p) + (1.0 - m) * std::log(1.0 - p);
  }
  const double inv = 1.0 / static_cast<double>(target.size());
  return make_op<T>(Tensor<T>({1}, static_cast<T>(s * inv)), {prob}, [target, inv, eps](Node<T>& n) {
    Node<T>& p = *n.parents[0];
    auto& g = p.grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = p.value[i];
      if (v <= eps || v >= 1.0 - eps) continue;
      const double m = target[i];
      g[i] += static_cast<T>(n.grad[0] * inv * (-m / v + (1.0 - m) / (1.0 - v)));
    }
  });
}

#define PACSR_INSTANTIATE(T)                                                                 \
  template void backward<T>(const Var<T>&);                                                  \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> scale<T>(const Var<T>&, T);                                                \
  template Var<T> gelu<T>(const Var<T>&);                                                    \
  template Var<T> sigmoid<T>(const Var<T>&);                                                 \
  template Var<T> clamp<T>(const Var<T>&, T, T);                                             \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                          \
  template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                          \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int);          \
  template Var<T> upsample2x<T>(const Var<T>&);                                              \
  template Var<T> layer_norm_channels<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);    \
  template Var<T> gather_pixels<T>(const Var<T>&, const std::vector<std::int64_t>&);         \
  template Var<T> sum<T>(const Var<T>&);                                                     \
  template Var<T> weighted_sum<T>(const Var<T>&, const Tensor<T>&);                          \
  template Var<T> mean_abs_diff<T>(const Var<T>&, const Tensor<T>&);                         \
  template Var<T> bce_mean<T>(const Var<T>&, const Tensor<T>&, double);

PACSR_INSTANTIATE(float)
PACSR_INSTANTIATE(double)

}  // namespace pacsr::ag
