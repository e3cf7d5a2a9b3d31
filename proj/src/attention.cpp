#include "pacsr/attention.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace pacsr {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Turns a matrix of scaled similarities into the dense and screened softmax rows.
template <typename T, typename Scores>
void score_rows(const Scores& s, T* dense, T* sparse) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Col = Eigen::Array<T, Eigen::Dynamic, 1>;
  const Eigen::Index p = s.rows(), q = s.cols();
  Eigen::Map<Arr> d(dense, p, q), sp(sparse, p, q);
  const auto sa = s.array();
  const Col m = sa.rowwise().maxCoeff();
  d = sa.colwise() - m;
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> flat(dense, p * q);
  flat = flat.exp();
  sp = (sa >= T(0)).select(d, T(0));
  const Col total = d.rowwise().sum();
  const Col kept = sp.rowwise().sum();
  d.colwise() /= total;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (m[i] >= T(0)) {
      sp.row(i) /= kept[i];
    } else {
      // Every similarity is negative: keep only the first maximum.
      Eigen::Index arg = 0;
      s.row(i).maxCoeff(&arg);
      sp.row(i).setZero();
      sp(i, arg) = T(1);
    }
  }
}

template <typename T>
void check_qk(const Tensor<T>& q, const Tensor<T>& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.shape() != k.shape())
    throw DimensionError("attention: q and k must both be (P,d), got " + shape_str(q.shape()) + " and " +
                         shape_str(k.shape()));
  if (q.dim(1) == 0) throw ArgumentError("attention: head dimension must be positive");
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> both_scores(const Tensor<T>& q, const Tensor<T>& k) {
  check_qk(q, k);
  const int p = q.dim(0), d = q.dim(1);
  Eigen::Map<const RowMat<T>> qm(q.data(), p, d), km(k.data(), p, d);
  const RowMat<T> s = (qm * km.transpose()) / std::sqrt(static_cast<T>(d));
  Tensor<T> dense({p, p}), sparse({p, p});
  score_rows<T>(s, dense.data(), sparse.data());
  return {std::move(dense), std::move(sparse)};
}

}  // namespace

template <typename T>
Tensor<T> dense_attention(const Tensor<T>& q, const Tensor<T>& k) {
  return both_scores(q, k).first;
}

template <typename T>
Tensor<T> sparse_attention(const Tensor<T>& q, const Tensor<T>& k) {
  return both_scores(q, k).second;
}

template <typename T>
void DSLAParams<T>::validate() const {
  const int c = channels();
  for (const ConvLayer<T>* l : {&wq, &wk, &wv, &proj_out})
    if (l->weight.shape() != Shape{c, c, 1, 1})
      throw DimensionError("DSLA: projection weights must be (C,C,1,1), got " + shape_str(l->weight.shape()));
  if (num_heads <= 0 || c % num_heads)
    throw DimensionError("DSLA: " + std::to_string(c) + " channels not divisible by " +
                         std::to_string(num_heads) + " heads");
  if (omega1.value().size() != static_cast<std::size_t>(num_heads) ||
      omega2.value().size() != static_cast<std::size_t>(num_heads))
    throw DimensionError("DSLA: omega weights must have one entry per head");
}

namespace ag {

template <typename T>
Var<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Var<T>& omega1,
                       const Var<T>& omega2, int token_len, int num_heads) {
  const Shape& s = q.shape();
  if (s.size() != 3 || k.shape() != s || v.shape() != s)
    throw DimensionError("local_attention: q, k, v must share an (N,C,L) shape");
  const int batch = s[0], ch = s[1], len = s[2];
  if (num_heads <= 0 || ch % num_heads) throw DimensionError("local_attention: heads must divide channels");
  if (token_len <= 0 || len % token_len) throw ArgumentError("local_attention: token length must divide L");
  if (omega1.value().size() != static_cast<std::size_t>(num_heads) ||
      omega2.value().size() != static_cast<std::size_t>(num_heads))
    throw DimensionError("local_attention: omega weights must have one entry per head");

  const int dh = ch / num_heads;
  const int ntok = len / token_len;
  const int p = token_len;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  // The attention maps are cheap to rebuild, so backward recomputes them
  // instead of holding batch*tokens*heads p-by-p buffers alive.
  Tensor<T> out(s);
  RowMat<T> scores(p, p), mix(p, p), dm(p, p), sm(p, p);
  for (int n = 0; n < batch; ++n)
    for (int t = 0; t < ntok; ++t)
      for (int h = 0; h < num_heads; ++h) {
        const std::size_t off = (static_cast<std::size_t>(n) * ch + h * dh) * len + t * p;
        const Eigen::OuterStride<> stride(len);
        CStridedMap<T> qt(q.value().data() + off, dh, p, stride);
        CStridedMap<T> kt(k.value().data() + off, dh, p, stride);
        CStridedMap<T> vt(v.value().data() + off, dh, p, stride);
        StridedMap<T> ot(out.data() + off, dh, p, stride);
        scores.noalias() = qt.transpose() * kt;
        scores *= inv_sqrt;
        score_rows<T>(scores, dm.data(), sm.data());
        mix = omega1.value()[h] * dm + omega2.value()[h] * sm;
        ot.noalias() = vt * mix.transpose();
      }

  return make_op<T>(std::move(out), {q, k, v, omega1, omega2}, [=](Node<T>& node) {
    Node<T>& pq = *node.parents[0];
    Node<T>& pk = *node.parents[1];
    Node<T>& pv = *node.parents[2];
    Node<T>& pw1 = *node.parents[3];
    Node<T>& pw2 = *node.parents[4];
    RowMat<T> scores(p, p), dm(p, p), sm(p, p), mixb(p, p), da(p, p), ds(p, p), scratch(dh, p);
    for (int n = 0; n < batch; ++n)
      for (int t = 0; t < ntok; ++t)
        for (int h = 0; h < num_heads; ++h) {
          const std::size_t off = (static_cast<std::size_t>(n) * ch + h * dh) * len + t * p;
          const Eigen::OuterStride<> stride(len);
          CStridedMap<T> qt(pq.value.data() + off, dh, p, stride);
          CStridedMap<T> kt(pk.value.data() + off, dh, p, stride);
          CStridedMap<T> vt(pv.value.data() + off, dh, p, stride);
          CStridedMap<T> dot(node.grad.data() + off, dh, p, stride);
          scores.noalias() = qt.transpose() * kt;
          scores *= inv_sqrt;
          score_rows<T>(scores, dm.data(), sm.data());
          const T w1 = pw1.value[h], w2 = pw2.value[h];

          if (pv.requires_grad) {
            mixb = w1 * dm + w2 * sm;
            StridedMap<T> dvt(pv.grad_ref().data() + off, dh, p, stride);
            dvt.noalias() += dot * mixb;
          }
          da.noalias() = dot.transpose() * vt;
          if (pw1.requires_grad) pw1.grad_ref()[h] += (dm.array() * da.array()).sum();
          if (pw2.requires_grad) pw2.grad_ref()[h] += (sm.array() * da.array()).sum();
          if (!pq.requires_grad && !pk.requires_grad) continue;

          // Softmax backward for both branches: dS = P * (dP - rowsum(dP * P)).
          {
            const auto a = da.array();
            const auto dma = dm.array(), sma = sm.array();
            const Eigen::Array<T, Eigen::Dynamic, 1> rd = w1 * (a * dma).rowwise().sum();
            const Eigen::Array<T, Eigen::Dynamic, 1> rs = w2 * (a * sma).rowwise().sum();
            ds.array() = dma * ((w1 * a).colwise() - rd) + sma * ((w2 * a).colwise() - rs);
          }
          ds *= inv_sqrt;
          if (pq.requires_grad) {
            StridedMap<T> dqt(pq.grad_ref().data() + off, dh, p, stride);
            scratch.noalias() = kt * ds.transpose();
            dqt += scratch;
          }
          if (pk.requires_grad) {
            StridedMap<T> dkt(pk.grad_ref().data() + off, dh, p, stride);
            scratch.noalias() = qt * ds;
            dkt += scratch;
          }
        }
  });
}

template <typename T>
Var<T> dsla(const Var<T>& x, const DSLAParams<T>& p, int token_len) {
  p.validate();
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != p.channels())
    throw DimensionError("dsla: expected (N," + std::to_string(p.channels()) + ",L), got " + shape_str(s));
  const Var<T> x4 = reshape(x, {s[0], s[1], s[2], 1});
  auto project = [&](const ConvLayer<T>& l) { return reshape(l(x4), s); };
  const Var<T> att = local_attention(project(p.wq), project(p.wk), project(p.wv), p.omega1, p.omega2,
                                     token_len, p.num_heads);
  return reshape(p.proj_out(reshape(att, {s[0], s[1], s[2], 1})), s);
}

template Var<float> local_attention<float>(const Var<float>&, const Var<float>&, const Var<float>&,
                                           const Var<float>&, const Var<float>&, int, int);
template Var<double> local_attention<double>(const Var<double>&, const Var<double>&, const Var<double>&,
                                             const Var<double>&, const Var<double>&, int, int);
template Var<float> dsla<float>(const Var<float>&, const DSLAParams<float>&, int);
template Var<double> dsla<double>(const Var<double>&, const DSLAParams<double>&, int);

}  // namespace ag

template <typename T>
TokenBatch<T> dsla_forward(const TokenBatch<T>& t, const DSLAParams<T>& p) {
  const int ntok = t.num_tokens(), len = t.token_len(), ch = t.channels();
  if (ch != p.channels())
    throw DimensionError("dsla_forward: tokens have " + std::to_string(ch) + " channels, params expect " +
                         std::to_string(p.channels()));
  const int total = ntok * len;
  Tensor<T> seq({1, ch, total});
  for (int i = 0; i < total; ++i)
    for (int c = 0; c < ch; ++c) seq[c * total + i] = t.tokens[i * ch + c];
  const ag::Var<T> y = ag::dsla(ag::Var<T>(std::move(seq)), p, len);
  TokenBatch<T> out{Tensor<T>(t.tokens.shape()), t.permutation, t.height, t.width};
  for (int i = 0; i < total; ++i)
    for (int c = 0; c < ch; ++c) out.tokens[i * ch + c] = y.value()[c * total + i];
  return out;
}

template struct DSLAParams<float>;
template struct DSLAParams<double>;
template Tensor<float> dense_attention<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> dense_attention<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> sparse_attention<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> sparse_attention<double>(const Tensor<double>&, const Tensor<double>&);
template TokenBatch<float> dsla_forward<float>(const TokenBatch<float>&, const DSLAParams<float>&);
template TokenBatch<double> dsla_forward<double>(const TokenBatch<double>&, const DSLAParams<double>&);

}  // namespace pacsr
