#pragma once

// Minimal tape-free reverse-mode differentiation. Every op returns a Var whose
// node remembers its parents and a closure that pushes the node's gradient
// into them. backward() walks the graph in reverse topological order.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pacsr/tensor.hpp"

namespace pacsr::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_ref() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node<T>> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds a result node. The closure is dropped when no parent needs a gradient.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  for (const auto& p : parents)
    if (p.requires_grad()) node->requires_grad = true;
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
  }
  return Var<T>::from_node(std::move(node));
}

/// Seeds d(root)/d(root) = 1 and accumulates gradients into every leaf that requires them.
template <typename T>
void backward(const Var<T>& root);

// Elementwise and structural ops.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> clamp(const Var<T>& a, T lo, T hi);
template <typename T> Var<T> reshape(const Var<T>& a, Shape s);

/// Concatenates along axis 1 (channels); all other axes must agree.
template <typename T> Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// 2-D convolution. x (N,Cin,H,W), w (Cout,Cin,k,k), b (Cout) or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);

/// Nearest-neighbour 2x upsampling of (N,C,H,W).
template <typename T> Var<T> upsample2x(const Var<T>& x);

/// Per-pixel normalisation across channels with affine gamma/beta of shape (C).
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

/// out[n,c,i] = x[n,c,index[i]] over the flattened trailing axes. Output is (N,C,L).
template <typename T>
Var<T> gather_pixels(const Var<T>& x, const std::vector<std::int64_t>& index);

// Scalar reductions (result has shape {1}).
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> weighted_sum(const Var<T>& a, const Tensor<T>& weights);
template <typename T> Var<T> mean_abs_diff(const Var<T>& pred, const Tensor<T>& target);

/// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
template <typename T>
Var<T> bce_mean(const Var<T>& prob, const Tensor<T>& target, double eps = 1e-7);

}  // namespace pacsr::ag
