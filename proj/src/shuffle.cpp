#include "pacsr/shuffle.hpp"

namespace pacsr {

bool is_permutation(const Permutation& perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (auto p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::int64_t{0});
  return p;
}

Permutation inverse_permutation(const Permutation& perm) {
  if (!is_permutation(perm, perm.size())) throw ArgumentError("inverse_permutation: not a bijection");
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<std::int64_t>(i);
  return inv;
}

Permutation random_permutation(std::size_t n, std::mt19937_64& rng) {
  Permutation p = identity_permutation(n);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(p[i - 1], p[pick(rng)]);
  }
  return p;
}

template <typename T>
TokenBatch<T> shuffle(const Tensor<T>& f, const Permutation& perm, int token_len) {
  if (f.rank() != 3) throw DimensionError("shuffle: expected (C,H,W), got " + shape_str(f.shape()));
  const int ch = f.dim(0), h = f.dim(1), w = f.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (!is_permutation(perm, n))
    throw ArgumentError("shuffle: permutation is not a bijection on " + std::to_string(n) + " pixels");
  if (token_len <= 0 || n % token_len)
    throw ArgumentError("shuffle: token length " + std::to_string(token_len) + " does not divide " +
                        std::to_string(n));
  TokenBatch<T> out{Tensor<T>({static_cast<int>(n / token_len), token_len, ch}), perm, h, w};
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) out.tokens[i * ch + c] = f[c * n + perm[i]];
  return out;
}

template <typename T>
Tensor<T> inverse_shuffle(const TokenBatch<T>& t) {
  const std::size_t n = static_cast<std::size_t>(t.height) * t.width;
  if (t.tokens.rank() != 3 || t.tokens.size() / std::max(1, t.channels()) != n)
    throw DimensionError("inverse_shuffle: token array does not cover the grid");
  if (!is_permutation(t.permutation, n)) throw ArgumentError("inverse_shuffle: corrupted permutation");
  const int ch = t.channels();
  Tensor<T> out({ch, t.height, t.width});
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < ch; ++c) out[c * n + t.permutation[i]] = t.tokens[i * ch + c];
  return out;
}

template TokenBatch<float> shuffle<float>(const Tensor<float>&, const Permutation&, int);
template TokenBatch<double> shuffle<double>(const Tensor<double>&, const Permutation&, int);
template Tensor<float> inverse_shuffle<float>(const TokenBatch<float>&);
template Tensor<double> inverse_shuffle<double>(const TokenBatch<double>&);

}  // namespace pacsr
