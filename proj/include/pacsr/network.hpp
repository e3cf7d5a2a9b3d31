#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacsr/attention.hpp"
#include "pacsr/prompt.hpp"
#include "pacsr/sfi.hpp"

namespace pacsr {

/// Component switches for ablation runs.
struct Ablations {
  bool disable_sfi = false;            // SFI blocks become plain 3x3 convolutions
  bool disable_sparse_branch = false;  // omega2 pinned to zero and frozen
  bool disable_guidance = false;       // guidance projections pinned to zero and frozen
  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct NetworkConfig {
  int base_channels = 32;
  int num_scales = 3;
  int blocks_per_scale = 2;
  int decoder_blocks = 1;
  int token_len = 64;
  int num_heads = 4;
  int ffn_expansion = 2;
  std::uint64_t seed = 0;
  Ablations ablations;

  void validate() const;
  /// Input height and width must be multiples of this.
  int size_multiple() const { return (1 << (num_scales - 1)) * 8; }
  void validate_input(int height, int width) const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const Ablations& a);
void from_json(const nlohmann::json& j, Ablations& a);
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// All learnable arrays of the two-module network, keyed by hierarchical names
/// such as "prompt.enc0.block1.sfi.conv2.w" or "removal.dec0.block0.attn.omega1".
template <typename T>
struct ModelParams {
  NetworkConfig config;
  std::map<std::string, ag::Var<T>> tensors;
  std::set<std::string> frozen;

  const ag::Var<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors.count(name) > 0; }
  bool trainable(const std::string& name) const { return !frozen.count(name); }

  ConvLayer<T> conv(const std::string& prefix, int stride = 1) const;
  NormLayer<T> norm(const std::string& prefix) const;
  SFIParams<T> sfi(const std::string& prefix) const;
  DSLAParams<T> dsla(const std::string& prefix) const;

  /// Names of guidance projection weights, one conv per scale.
  std::vector<std::string> guidance_projections() const;

  /// Turns gradient tracking on for trainable tensors and off for frozen ones.
  void enable_grad(bool on);
  void zero_grad();

  template <typename U>
  ModelParams<U> cast() const;
};

/// Deterministic in cfg.seed. Each tensor draws from its own generator keyed by
/// (seed, name), so ablations only perturb the tensors they own.
template <typename T>
ModelParams<T> init_params(const NetworkConfig& cfg);

enum class PermPolicy { train, eval };

/// Supplies one pixel permutation per attention block. Training draws from the
/// run's generator; eval replays a fixed seed-0 stream so inference is repeatable.
class PermutationSource {
 public:
  explicit PermutationSource(PermPolicy policy, std::mt19937_64* rng = nullptr);
  Permutation next(std::size_t n);
  PermPolicy policy() const { return policy_; }

 private:
  PermPolicy policy_;
  std::mt19937_64 fixed_{0};
  std::mt19937_64* rng_;
};

namespace ag {

template <typename T>
struct PromptAwareOutput {
  Var<T> mask;                  // (N,1,H,W) in (0,1)
  std::vector<Var<T>> guidance; // per scale (N,C,H/2^s,W/2^s)
};

/// input: (N,4,H,W) image channels + prompt map.
template <typename T>
PromptAwareOutput<T> prompt_aware(const Var<T>& input, const ModelParams<T>& params);

/// images: (N,3,H,W); mask: (N,1,H,W). Returns clamp(images + residual, 0, 1).
template <typename T>
Var<T> shadow_removal(const Var<T>& images, const Var<T>& mask, const std::vector<Var<T>>& guidance,
                      const ModelParams<T>& params, PermutationSource& perms);

/// The attention transformer block: pre-norm, shuffled DSLA, residual, feed-forward, residual.
template <typename T>
Var<T> transformer_block(const Var<T>& x, const ModelParams<T>& params, const std::string& prefix,
                         PermutationSource& perms);

template <typename T>
struct NetworkOutput {
  Var<T> restored;
  Var<T> mask;
};

/// Both modules end to end: the predicted mask feeds the removal module as input,
/// and the prompt-aware encoder features feed its encoder.
template <typename T>
NetworkOutput<T> pacsrnet(const Var<T>& images, const Var<T>& prompt_maps, const ModelParams<T>& params,
                          PermutationSource& perms);

}  // namespace ag

struct PromptAwareResult {
  ShadowMask mask;                      // (1,H,W)
  std::vector<Tensor<float>> guidance;  // per scale (C,H/2^s,W/2^s)
};

PromptAwareResult prompt_aware_forward(const Image& x, const Prompt& c, const ModelParams<float>& params);

Image shadow_removal_forward(const Image& x, const ShadowMask& mask, const std::vector<Tensor<float>>& guidance,
                             const ModelParams<float>& params, PermutationSource& perms);

struct RemovalResult {
  Image restored;   // (3,H,W)
  ShadowMask mask;  // (1,H,W)
};

RemovalResult pacsrnet_forward(const Image& x, const Prompt& c, const ModelParams<float>& params,
                               PermPolicy policy = PermPolicy::eval, std::mt19937_64* rng = nullptr);

}  // namespace pacsr
