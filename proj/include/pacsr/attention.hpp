#pragma once

#include "pacsr/layers.hpp"
#include "pacsr/shuffle.hpp"

namespace pacsr {

/// Row-wise softmax(q k^T / sqrt(d)) for q, k of shape (P, d).
template <typename T>
Tensor<T> dense_attention(const Tensor<T>& q, const Tensor<T>& k);

/// Same scaled similarities, but strictly negative entries are screened to -inf
/// before the softmax. A row with no non-negative entry keeps only its maximum
/// (first index on ties), so it becomes one-hot instead of undefined.
template <typename T>
Tensor<T> sparse_attention(const Tensor<T>& q, const Tensor<T>& k);

/// Dense-sparse local attention weights. Projections are bias-free C -> C maps
/// stored as 1x1 convolutions; omega1/omega2 hold one scalar per head.
template <typename T>
struct DSLAParams {
  ConvLayer<T> wq, wk, wv;
  ag::Var<T> omega1, omega2;  // (num_heads)
  ConvLayer<T> proj_out;
  int num_heads = 1;

  int channels() const { return wq.out_channels(); }
  void validate() const;

  static DSLAParams zeros(int channels, int heads) {
    auto bias_free = [channels] {
      auto c = ConvLayer<T>::zeros(channels, channels, 1);
      c.bias = {};
      return c;
    };
    return {bias_free(), bias_free(), bias_free(), ag::Var<T>(Tensor<T>({heads}, T(0.5))),
            ag::Var<T>(Tensor<T>({heads}, T(0.5))), ConvLayer<T>::zeros(channels, channels, 1), heads};
  }
};

/// Attention over each token of a TokenBatch; output tokens keep the permutation.
template <typename T>
TokenBatch<T> dsla_forward(const TokenBatch<T>& t, const DSLAParams<T>& p);

namespace ag {

/// (omega1 * dense + omega2 * sparse) @ v per token and head. q, k, v are (N,C,L)
/// with tokens as consecutive runs of token_len positions; heads split C evenly.
template <typename T>
Var<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Var<T>& omega1,
                       const Var<T>& omega2, int token_len, int num_heads);

/// Full block on token-ordered (N,C,L): projections, local_attention, proj_out.
template <typename T>
Var<T> dsla(const Var<T>& x, const DSLAParams<T>& p, int token_len);

}  // namespace ag
}  // namespace pacsr
