#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pacsr/tensor.hpp"

namespace pacsr {

/// perm[i] is the source pixel (row-major index) placed at sequence position i.
using Permutation = std::vector<std::int64_t>;

bool is_permutation(const Permutation& perm, std::size_t n);
Permutation identity_permutation(std::size_t n);
Permutation inverse_permutation(const Permutation& perm);
/// Uniform Fisher-Yates draw.
Permutation random_permutation(std::size_t n, std::mt19937_64& rng);

/// Pixel vectors of one (C,H,W) map regrouped into local tokens after a permutation.
template <typename T>
struct TokenBatch {
  Tensor<T> tokens;  // (num_tokens, token_len, C)
  Permutation permutation;
  int height = 0;
  int width = 0;

  int num_tokens() const { return tokens.dim(0); }
  int token_len() const { return tokens.dim(1); }
  int channels() const { return tokens.dim(2); }
};

/// Throws ArgumentError if perm is not a bijection on H*W or token_len does not divide H*W.
template <typename T>
TokenBatch<T> shuffle(const Tensor<T>& f, const Permutation& perm, int token_len);

/// Exact inverse of shuffle. Throws ArgumentError on a corrupted permutation.
template <typename T>
Tensor<T> inverse_shuffle(const TokenBatch<T>& t);

}  // namespace pacsr
