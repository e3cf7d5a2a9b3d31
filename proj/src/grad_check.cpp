#include "pacsr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pacsr/losses.hpp"

namespace pacsr {

using V = ag::Var<double>;

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace {

Tensor<double> random_tensor(const Shape& s, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(s);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

struct Leaf {
  std::string name;
  V var;
  std::vector<std::size_t> indices;  // entries to probe
};

// Backpropagates once, then probes each requested entry with central differences.
template <typename Loss>
void probe(GradCheckResult& res, std::vector<Leaf>& leaves, Loss&& loss, double h) {
  for (auto& l : leaves) {
    l.var.set_requires_grad(true);
    l.var.zero_grad();
  }
  ag::backward(loss());
  for (auto& l : leaves) {
    const Tensor<double> grad = l.var.grad().empty() ? Tensor<double>(l.var.shape()) : l.var.grad();
    for (std::size_t i : l.indices) {
      double& x = l.var.mutable_value()[i];
      const double saved = x;
      const double mid = loss().value()[0];
      double numeric = 0, used = h;
      for (double step = h; step >= h / 100 * 0.99; step /= 10) {
        x = saved + step;
        const double up = loss().value()[0];
        x = saved - step;
        const double down = loss().value()[0];
        x = saved;
        const double fwd = (up - mid) / step, bwd = (mid - down) / step;
        numeric = (up - down) / (2 * step);
        used = step;
        if (std::abs(fwd - bwd) <= 0.01 * std::max({std::abs(fwd), std::abs(bwd), 1e-6})) break;
      }
      GradCheckEntry e{l.name + "[" + std::to_string(i) + "]", grad[i], numeric, 0, used};
      e.rel_error = relative_error(e.analytic, e.numeric);
      res.max_rel_error = std::max(res.max_rel_error, e.rel_error);
      res.entries.push_back(std::move(e));
    }
  }
}

std::vector<std::size_t> all_indices(const V& v) {
  std::vector<std::size_t> idx(v.value().size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

void add_conv(std::vector<Leaf>& leaves, const std::string& name, ConvLayer<double>& c, std::mt19937_64& rng) {
  c.weight.mutable_value() = random_tensor(c.weight.shape(), rng, 0.5);
  leaves.push_back({name + ".w", c.weight, all_indices(c.weight)});
  if (c.bias.defined()) {
    c.bias.mutable_value() = random_tensor(c.bias.shape(), rng, 0.5);
    leaves.push_back({name + ".b", c.bias, all_indices(c.bias)});
  }
}

}  // namespace

GradCheckResult check_sfi_gradients(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  const int c = 4;
  SFIParams<double> p = SFIParams<double>::zeros(c);
  std::vector<Leaf> leaves;
  add_conv(leaves, "conv1", p.conv1, rng);
  add_conv(leaves, "conv2", p.conv2, rng);
  add_conv(leaves, "conv3", p.conv3, rng);
  add_conv(leaves, "agg", p.agg, rng);
  V x(random_tensor({1, c, 8, 8}, rng));
  leaves.push_back({"input", x, all_indices(x)});
  const Tensor<double> weights = random_tensor({1, c, 8, 8}, rng);

  GradCheckResult res{"sfi", 1e-3, 0, {}};
  probe(res, leaves, [&] { return ag::weighted_sum(ag::sfi(x, p), weights); }, h);
  return res;
}

GradCheckResult check_dsla_gradients(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  const int c = 8, heads = 2, token_len = 8, tokens = 4;
  DSLAParams<double> p = DSLAParams<double>::zeros(c, heads);
  std::vector<Leaf> leaves;
  add_conv(leaves, "wq", p.wq, rng);
  add_conv(leaves, "wk", p.wk, rng);
  add_conv(leaves, "wv", p.wv, rng);
  add_conv(leaves, "proj_out", p.proj_out, rng);
  p.omega1.mutable_value() = random_tensor({heads}, rng);
  p.omega2.mutable_value() = random_tensor({heads}, rng);
  leaves.push_back({"omega1", p.omega1, all_indices(p.omega1)});
  leaves.push_back({"omega2", p.omega2, all_indices(p.omega2)});
  V x(random_tensor({1, c, tokens * token_len}, rng));
  leaves.push_back({"input", x, all_indices(x)});
  const Tensor<double> weights = random_tensor({1, c, tokens * token_len}, rng);

  GradCheckResult res{"dsla", 1e-3, 0, {}};
  probe(res, leaves, [&] { return ag::weighted_sum(ag::dsla(x, p, token_len), weights); }, h);
  return res;
}

GradCheckResult check_network_gradients(const NetworkConfig& cfg, int size, int count, std::uint64_t seed,
                                        double h) {
  cfg.validate_input(size, size);
  ModelParams<double> params = init_params<float>(cfg).cast<double>();
  std::mt19937_64 rng(seed);

  Tensor<double> x({1, 3, size, size}), y({1, 3, size, size}), m({1, 1, size, size});
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (auto& v : x.values()) v = u(rng);
  for (auto& v : y.values()) v = u(rng);
  for (auto& v : m.values()) v = u(rng) > 0.7 ? 1.0 : 0.0;
  Tensor<double> prompt({1, 1, size, size});
  for (int yy = size / 4; yy < size / 2; ++yy)
    for (int xx = size / 4; xx < size / 2; ++xx) prompt.at(0, 0, yy, xx) = 1.0;
  const V xv(x), pv(prompt);

  std::vector<std::string> names;
  for (const auto& [name, _] : params.tensors)
    if (params.trainable(name)) names.push_back(name);
  std::shuffle(names.begin(), names.end(), rng);
  names.resize(std::min<std::size_t>(names.size(), static_cast<std::size_t>(count)));
  std::sort(names.begin(), names.end());

  std::vector<Leaf> leaves;
  for (const auto& name : names) {
    const V& var = params.tensors.at(name);
    const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, var.value().size() - 1)(rng);
    leaves.push_back({name, var, {idx}});
  }

  const LossConfig loss_cfg;
  GradCheckResult res{"network_" + std::to_string(size) + "x" + std::to_string(size), 1e-2, 0, {}};
  probe(res, leaves,
        [&] {
          // Eval permutations replay the same stream on every call.
          PermutationSource perms(PermPolicy::eval);
          const auto out = ag::pacsrnet(xv, pv, params, perms);
          return ag::loss_total(out.restored, y, out.mask, m, loss_cfg).total;
        },
        h);
  return res;
}

std::vector<GradCheckResult> grad_check(const NetworkConfig& cfg) {
  return {check_sfi_gradients(cfg.seed), check_dsla_gradients(cfg.seed), check_network_gradients(cfg)};
}

void to_json(nlohmann::json& j, const GradCheckResult& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"name", e.name}, {"analytic", e.analytic}, {"numeric", e.numeric}, {"rel_error", e.rel_error}, {"step", e.step}});
  j = {{"check", r.label},
       {"max_rel_error", r.max_rel_error},
       {"tolerance", r.tolerance},
       {"passed", r.passed()},
       {"entries", entries}};
}

}  // namespace pacsr
