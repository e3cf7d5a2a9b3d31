#include "pacsr/network.hpp"

#include <cmath>

namespace pacsr {

void NetworkConfig::validate() const {
  if (base_channels < 1 || num_scales < 1 || blocks_per_scale < 1 || decoder_blocks < 0 || token_len < 1 ||
      num_heads < 1 || ffn_expansion < 1)
    throw ArgumentError("network config: all sizes must be positive");
  if (base_channels % num_heads)
    throw ArgumentError("network config: base_channels must be divisible by num_heads");
}

void NetworkConfig::validate_input(int height, int width) const {
  const int m = size_multiple();
  if (height <= 0 || width <= 0 || height % m || width % m)
    throw ArgumentError("input size " + std::to_string(height) + "x" + std::to_string(width) +
                        " must be a positive multiple of " + std::to_string(m));
  const long smallest = static_cast<long>(height >> (num_scales - 1)) * (width >> (num_scales - 1));
  if (smallest % token_len)
    throw ArgumentError("token length " + std::to_string(token_len) + " does not divide the " +
                        std::to_string(smallest) + " pixels of the coarsest scale");
}

void to_json(nlohmann::json& j, const Ablations& a) {
  j = {{"disable_sfi", a.disable_sfi},
       {"disable_sparse_branch", a.disable_sparse_branch},
       {"disable_guidance", a.disable_guidance}};
}

void from_json(const nlohmann::json& j, Ablations& a) {
  a.disable_sfi = j.value("disable_sfi", false);
  a.disable_sparse_branch = j.value("disable_sparse_branch", false);
  a.disable_guidance = j.value("disable_guidance", false);
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"base_channels", c.base_channels}, {"num_scales", c.num_scales},
       {"blocks_per_scale", c.blocks_per_scale}, {"decoder_blocks", c.decoder_blocks},
       {"token_len", c.token_len}, {"num_heads", c.num_heads},
       {"ffn_expansion", c.ffn_expansion}, {"seed", c.seed},
       {"ablations", c.ablations}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  NetworkConfig d;
  c.base_channels = j.value("base_channels", d.base_channels);
  c.num_scales = j.value("num_scales", d.num_scales);
  c.blocks_per_scale = j.value("blocks_per_scale", d.blocks_per_scale);
  c.decoder_blocks = j.value("decoder_blocks", d.decoder_blocks);
  c.token_len = j.value("token_len", d.token_len);
  c.num_heads = j.value("num_heads", d.num_heads);
  c.ffn_expansion = j.value("ffn_expansion", d.ffn_expansion);
  c.seed = j.value("seed", d.seed);
  c.ablations = j.value("ablations", Ablations{});
}

// ---------------------------------------------------------------------------
// Parameter store

template <typename T>
const ag::Var<T>& ModelParams<T>::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ArgumentError("missing parameter '" + name + "'");
  return it->second;
}

template <typename T>
ConvLayer<T> ModelParams<T>::conv(const std::string& prefix, int stride) const {
  ConvLayer<T> c{at(prefix + ".w"), {}, stride};
  if (contains(prefix + ".b")) c.bias = at(prefix + ".b");
  return c;
}

template <typename T>
NormLayer<T> ModelParams<T>::norm(const std::string& prefix) const {
  return {at(prefix + ".gamma"), at(prefix + ".beta")};
}

template <typename T>
SFIParams<T> ModelParams<T>::sfi(const std::string& prefix) const {
  return {conv(prefix + ".conv1"), conv(prefix + ".conv2"), conv(prefix + ".conv3"), conv(prefix + ".agg")};
}

template <typename T>
DSLAParams<T> ModelParams<T>::dsla(const std::string& prefix) const {
  return {conv(prefix + ".wq"),      conv(prefix + ".wk"),       conv(prefix + ".wv"),
          at(prefix + ".omega1"),    at(prefix + ".omega2"),     conv(prefix + ".proj_out"),
          config.num_heads};
}

template <typename T>
std::vector<std::string> ModelParams<T>::guidance_projections() const {
  std::vector<std::string> out;
  for (int s = 0; s < config.num_scales; ++s) out.push_back("guidance.proj" + std::to_string(s));
  return out;
}

template <typename T>
void ModelParams<T>::enable_grad(bool on) {
  for (auto& [name, v] : tensors) v.set_requires_grad(on && trainable(name));
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& [name, v] : tensors) v.zero_grad();
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.config = config;
  out.frozen = frozen;
  for (const auto& [name, v] : tensors) out.tensors.emplace(name, ag::Var<U>(v.value().template cast<U>()));
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
class Initializer {
 public:
  Initializer(ModelParams<T>& params, std::uint64_t seed) : params_(params), seed_(seed) {}

  void conv(const std::string& name, int cin, int cout, int k, bool bias = true, double gain = 1.0) {
    std::mt19937_64 rng(splitmix64(seed_ ^ fnv1a(name + ".w")));
    const double bound = gain / std::sqrt(static_cast<double>(cin * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor<T> w({cout, cin, k, k});
    for (auto& v : w.values()) v = static_cast<T>(u(rng));
    params_.tensors.emplace(name + ".w", ag::Var<T>(std::move(w)));
    if (bias) params_.tensors.emplace(name + ".b", ag::Var<T>(Tensor<T>({cout})));
  }

  void norm(const std::string& name, int ch) {
    params_.tensors.emplace(name + ".gamma", ag::Var<T>(Tensor<T>({ch}, T(1))));
    params_.tensors.emplace(name + ".beta", ag::Var<T>(Tensor<T>({ch})));
  }

  void constant(const std::string& name, Shape shape, T value) {
    params_.tensors.emplace(name, ag::Var<T>(Tensor<T>(std::move(shape), value)));
  }

  void zero_and_freeze_conv(const std::string& name) {
    for (const char* suffix : {".w", ".b"}) {
      auto it = params_.tensors.find(name + suffix);
      if (it == params_.tensors.end()) continue;
      it->second.mutable_value().fill(T(0));
      params_.frozen.insert(name + suffix);
    }
  }

 private:
  ModelParams<T>& params_;
  std::uint64_t seed_;
};

std::string enc_block(const std::string& module, int s, int b) {
  return module + ".enc" + std::to_string(s) + ".block" + std::to_string(b);
}

std::string dec_block(const std::string& module, int s, int b) {
  return module + ".dec" + std::to_string(s) + ".block" + std::to_string(b);
}

template <typename T>
void init_transformer_block(Initializer<T>& init, const NetworkConfig& cfg, const std::string& prefix) {
  const int c = cfg.base_channels;
  init.norm(prefix + ".norm1", c);
  for (const char* proj : {".attn.wq", ".attn.wk", ".attn.wv"}) init.conv(prefix + proj, c, c, 1, false);
  init.conv(prefix + ".attn.proj_out", c, c, 1);
  init.constant(prefix + ".attn.omega1", {cfg.num_heads}, T(0.5));
  init.constant(prefix + ".attn.omega2", {cfg.num_heads},
                cfg.ablations.disable_sparse_branch ? T(0) : T(0.5));
  init.norm(prefix + ".norm2", c);
  init.conv(prefix + ".ffn1", c, c * cfg.ffn_expansion, 1);
  init.conv(prefix + ".ffn2", c * cfg.ffn_expansion, c, 1);
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const NetworkConfig& cfg) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  Initializer<T> init(p, cfg.seed);
  const int c = cfg.base_channels;

  // Prompt-aware module.
  // Convs that feed a GELU get He-scaled bounds, SFI internals unit-variance ones;
  // with the default 1/sqrt(fan_in) bound the deepest guidance starts ~1e-5.
  const double relu_gain = std::sqrt(6.0), unit_gain = std::sqrt(3.0);
  init.conv("prompt.stem", 4, c, 3, true, relu_gain);
  for (int s = 0; s < cfg.num_scales; ++s) {
    for (int b = 0; b < cfg.blocks_per_scale; ++b) {
      const std::string blk = enc_block("prompt", s, b);
      if (cfg.ablations.disable_sfi) {
        init.conv(blk + ".conv", c, c, 3, true, relu_gain);
      } else {
        init.conv(blk + ".sfi.conv1", c, c, 3, true, unit_gain);
        init.conv(blk + ".sfi.conv2", 4 * c, 4 * c, 1, true, unit_gain);
        init.conv(blk + ".sfi.conv3", c, c, 1, true, unit_gain);
        init.conv(blk + ".sfi.agg", 2 * c, c, 3, true, relu_gain);
      }
    }
    if (s + 1 < cfg.num_scales) init.conv("prompt.down" + std::to_string(s), c, c, 3, true, relu_gain);
  }
  for (int s = 0; s + 1 < cfg.num_scales; ++s) {
    init.conv("prompt.dec" + std::to_string(s) + ".up", c, c, 3, true, relu_gain);
    init.conv("prompt.dec" + std::to_string(s) + ".fuse", 2 * c, c, 3, true, relu_gain);
  }
  init.conv("prompt.head", c, 1, 1);

  // Guidance projections.
  for (int s = 0; s < cfg.num_scales; ++s) {
    const std::string name = "guidance.proj" + std::to_string(s);
    init.conv(name, c, c, 1);
    if (cfg.ablations.disable_guidance) init.zero_and_freeze_conv(name);
  }

  // Shadow removal module.
  init.conv("removal.stem", 4, c, 3);
  for (int s = 0; s < cfg.num_scales; ++s) {
    for (int b = 0; b < cfg.blocks_per_scale; ++b) init_transformer_block(init, cfg, enc_block("removal", s, b));
    if (s + 1 < cfg.num_scales) init.conv("removal.down" + std::to_string(s), c, c, 3);
  }
  for (int s = 0; s + 1 < cfg.num_scales; ++s) {
    init.conv("removal.dec" + std::to_string(s) + ".up", c, c, 3);
    init.conv("removal.dec" + std::to_string(s) + ".fuse", 2 * c, c, 1);
    for (int b = 0; b < cfg.decoder_blocks; ++b) init_transformer_block(init, cfg, dec_block("removal", s, b));
  }
  init.conv("removal.head", c, 3, 3, true, 0.1);

  if (cfg.ablations.disable_sparse_branch)
    for (const auto& [name, v] : p.tensors)
      if (name.size() > 7 && name.ends_with(".omega2")) p.frozen.insert(name);
  return p;
}

PermutationSource::PermutationSource(PermPolicy policy, std::mt19937_64* rng) : policy_(policy), rng_(rng) {
  if (policy == PermPolicy::train && rng == nullptr)
    throw ArgumentError("training permutations need the run's generator");
}

Permutation PermutationSource::next(std::size_t n) {
  return random_permutation(n, policy_ == PermPolicy::train ? *rng_ : fixed_);
}

namespace ag {

template <typename T>
Var<T> transformer_block(const Var<T>& x, const ModelParams<T>& params, const std::string& prefix,
                         PermutationSource& perms) {
  const Shape& s = x.shape();
  const int batch = s[0], ch = s[1], h = s[2], w = s[3];
  const std::size_t n = static_cast<std::size_t>(h) * w;

  const Permutation perm = perms.next(n);
  const Var<T> tokens = gather_pixels(params.norm(prefix + ".norm1")(x), perm);
  const Var<T> attended = dsla(tokens, params.dsla(prefix + ".attn"), params.config.token_len);
  const Var<T> restored = reshape(gather_pixels(attended, inverse_permutation(perm)), {batch, ch, h, w});
  const Var<T> y = add(x, restored);

  const Var<T> hidden = gelu(params.conv(prefix + ".ffn1")(params.norm(prefix + ".norm2")(y)));
  return add(y, params.conv(prefix + ".ffn2")(hidden));
}

template <typename T>
PromptAwareOutput<T> prompt_aware(const Var<T>& input, const ModelParams<T>& params) {
  const NetworkConfig& cfg = params.config;
  if (input.shape().size() != 4 || input.dim(1) != 4)
    throw ArgumentError("prompt-aware module expects (N,4,H,W) input, got " + shape_str(input.shape()));
  cfg.validate_input(input.dim(2), input.dim(3));

  PromptAwareOutput<T> out;
  std::vector<Var<T>> skips;
  Var<T> f = gelu(params.conv("prompt.stem")(input));
  for (int s = 0; s < cfg.num_scales; ++s) {
    for (int b = 0; b < cfg.blocks_per_scale; ++b) {
      const std::string blk = "prompt.enc" + std::to_string(s) + ".block" + std::to_string(b);
      f = gelu(cfg.ablations.disable_sfi ? params.conv(blk + ".conv")(f) : sfi(f, params.sfi(blk + ".sfi")));
    }
    out.guidance.push_back(f);
    skips.push_back(f);
    if (s + 1 < cfg.num_scales) f = gelu(params.conv("prompt.down" + std::to_string(s), 2)(f));
  }
  for (int s = cfg.num_scales - 2; s >= 0; --s) {
    const std::string dec = "prompt.dec" + std::to_string(s);
    const Var<T> up = gelu(params.conv(dec + ".up")(upsample2x(f)));
    f = gelu(params.conv(dec + ".fuse")(concat_channels(up, skips[s])));
  }
  out.mask = sigmoid(params.conv("prompt.head")(f));
  return out;
}

template <typename T>
Var<T> shadow_removal(const Var<T>& images, const Var<T>& mask, const std::vector<Var<T>>& guidance,
                      const ModelParams<T>& params, PermutationSource& perms) {
  const NetworkConfig& cfg = params.config;
  if (images.shape().size() != 4 || images.dim(1) != 3)
    throw ArgumentError("removal module expects (N,3,H,W) images, got " + shape_str(images.shape()));
  if (mask.shape() != Shape{images.dim(0), 1, images.dim(2), images.dim(3)})
    throw ArgumentError("removal module: mask shape " + shape_str(mask.shape()) + " does not match images");
  if (guidance.size() != static_cast<std::size_t>(cfg.num_scales))
    throw ArgumentError("removal module: expected " + std::to_string(cfg.num_scales) + " guidance maps");
  cfg.validate_input(images.dim(2), images.dim(3));

  std::vector<Var<T>> skips;
  Var<T> f = params.conv("removal.stem")(concat_channels(images, mask));
  for (int s = 0; s < cfg.num_scales; ++s) {
    const Var<T> g = params.conv("guidance.proj" + std::to_string(s))(guidance[s]);
    if (g.shape() != f.shape())
      throw ArgumentError("guidance at scale " + std::to_string(s) + " has shape " + shape_str(g.shape()) +
                          ", expected " + shape_str(f.shape()));
    f = add(f, g);
    for (int b = 0; b < cfg.blocks_per_scale; ++b)
      f = transformer_block(f, params, "removal.enc" + std::to_string(s) + ".block" + std::to_string(b), perms);
    skips.push_back(f);
    if (s + 1 < cfg.num_scales) f = params.conv("removal.down" + std::to_string(s), 2)(f);
  }
  for (int s = cfg.num_scales - 2; s >= 0; --s) {
    const std::string dec = "removal.dec" + std::to_string(s);
    const Var<T> up = params.conv(dec + ".up")(upsample2x(f));
    f = params.conv(dec + ".fuse")(concat_channels(up, skips[s]));
    for (int b = 0; b < cfg.decoder_blocks; ++b)
      f = transformer_block(f, params, dec + ".block" + std::to_string(b), perms);
  }
  const Var<T> delta = params.conv("removal.head")(f);
  return clamp(add(images, delta), T(0), T(1));
}

template <typename T>
NetworkOutput<T> pacsrnet(const Var<T>& images, const Var<T>& prompt_maps, const ModelParams<T>& params,
                          PermutationSource& perms) {
  const PromptAwareOutput<T> pa = prompt_aware(concat_channels(images, prompt_maps), params);
  return {shadow_removal(images, pa.mask, pa.guidance, params, perms), pa.mask};
}

}  // namespace ag

PromptAwareResult prompt_aware_forward(const Image& x, const Prompt& c, const ModelParams<float>& params) {
  const auto out = ag::prompt_aware(as_batch(encode_input(x, c)), params);
  PromptAwareResult r{unbatch(out.mask), {}};
  for (const auto& g : out.guidance) r.guidance.push_back(unbatch(g));
  return r;
}

Image shadow_removal_forward(const Image& x, const ShadowMask& mask, const std::vector<Tensor<float>>& guidance,
                             const ModelParams<float>& params, PermutationSource& perms) {
  std::vector<ag::Var<float>> g;
  for (const auto& t : guidance) g.push_back(as_batch(t));
  return unbatch(ag::shadow_removal(as_batch(x), as_batch(mask), g, params, perms));
}

RemovalResult pacsrnet_forward(const Image& x, const Prompt& c, const ModelParams<float>& params,
                               PermPolicy policy, std::mt19937_64* rng) {
  PermutationSource perms(policy, rng);
  if (x.rank() != 3 || x.dim(0) != 3) throw ArgumentError("expected a (3,H,W) image, got " + shape_str(x.shape()));
  const auto out = ag::pacsrnet(as_batch(x), as_batch(rasterize(c, x.dim(1), x.dim(2))), params, perms);
  return {unbatch(out.restored), unbatch(out.mask)};
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> init_params<float>(const NetworkConfig&);
template ModelParams<double> init_params<double>(const NetworkConfig&);

namespace ag {
#define PACSR_NET_INSTANTIATE(T)                                                                               \
  template Var<T> transformer_block<T>(const Var<T>&, const ModelParams<T>&, const std::string&,               \
                                       PermutationSource&);                                                    \
  template PromptAwareOutput<T> prompt_aware<T>(const Var<T>&, const ModelParams<T>&);                         \
  template Var<T> shadow_removal<T>(const Var<T>&, const Var<T>&, const std::vector<Var<T>>&,                  \
                                    const ModelParams<T>&, PermutationSource&);                                \
  template NetworkOutput<T> pacsrnet<T>(const Var<T>&, const Var<T>&, const ModelParams<T>&, PermutationSource&);
PACSR_NET_INSTANTIATE(float)
PACSR_NET_INSTANTIATE(double)
}  // namespace ag

}  // namespace pacsr
