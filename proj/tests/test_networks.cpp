#include <doctest.h>

#include <random>

#include "pacsr/errors.hpp"
#include "pacsr/grad_check.hpp"
#include "pacsr/network.hpp"

using namespace pacsr;

namespace {

NetworkConfig small_config(std::uint64_t seed = 0) {
  NetworkConfig cfg;
  cfg.base_channels = 8;
  cfg.num_scales = 2;
  cfg.blocks_per_scale = 1;
  cfg.token_len = 16;
  cfg.num_heads = 2;
  cfg.seed = seed;
  return cfg;
}

Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  Image x({3, h, w});
  for (auto& v : x.values()) v = u(rng);
  return x;
}

bool same_params(const ModelParams<float>& a, const ModelParams<float>& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (const auto& [name, v] : a.tensors)
    if (!b.contains(name) || !(v.value() == b.at(name).value())) return false;
  return true;
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("init is deterministic in the seed") {
  const auto a = init_params<float>(small_config(3)), b = init_params<float>(small_config(3));
  CHECK(same_params(a, b));
  CHECK_FALSE(same_params(a, init_params<float>(small_config(4))));
  for (const auto& [name, v] : a.tensors) {
    CHECK(v.value().all_finite());
    if (name.ends_with(".omega1") || name.ends_with(".omega2"))
      for (float w : v.value().values()) CHECK(w == 0.5f);
  }
  CHECK(a.at("prompt.head.b").value() == Tensor<float>({1}));
}

TEST_CASE("default config has one guidance projection per scale") {
  const auto p = init_params<float>(NetworkConfig{});
  CHECK(p.guidance_projections().size() == 3);
  for (int s = 0; s < 3; ++s) {
    CHECK(p.at("guidance.proj" + std::to_string(s) + ".w").shape() == Shape{32, 32, 1, 1});
  }
  CHECK_FALSE(p.contains("guidance.proj3.w"));
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  CHECK(cfg.size_multiple() == 16);
  CHECK_NOTHROW(cfg.validate_input(32, 48));
  CHECK_THROWS_AS(cfg.validate_input(32, 40), ArgumentError);
  cfg.num_heads = 3;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.num_scales = 0;
  CHECK_THROWS(cfg.validate());

  nlohmann::json j = small_config(9);
  CHECK(j.get<NetworkConfig>() == small_config(9));
}

TEST_CASE("prompt-aware module contract") {
  const auto p = init_params<float>(small_config());
  const auto x = random_image(32, 48, 1);
  const auto r = prompt_aware_forward(x, Prompt::dot({10, 12}), p);
  CHECK(r.mask.shape() == Shape{1, 32, 48});
  for (float v : r.mask.values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  REQUIRE(r.guidance.size() == 2);
  CHECK(r.guidance[0].shape() == Shape{8, 32, 48});
  CHECK(r.guidance[1].shape() == Shape{8, 16, 24});

  const auto again = prompt_aware_forward(x, Prompt::dot({10, 12}), p);
  CHECK(again.mask == r.mask);
  CHECK_FALSE(prompt_aware_forward(x, Prompt::dot({40, 20}), p).mask == r.mask);
  CHECK_THROWS_AS(prompt_aware_forward(random_image(24, 48, 1), Prompt::dot({1, 1}), p), ArgumentError);
}

TEST_CASE("end-to-end shapes, range and eval determinism") {
  const auto p = init_params<float>(small_config());
  const auto x = random_image(32, 32, 2);
  const auto prompt = Prompt::line({{3, 4}, {20, 25}});
  const auto a = pacsrnet_forward(x, prompt, p);
  CHECK(a.restored.shape() == Shape{3, 32, 32});
  CHECK(a.mask.shape() == Shape{1, 32, 32});
  for (float v : a.restored.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  const auto b = pacsrnet_forward(x, prompt, p);
  CHECK(a.restored == b.restored);
  CHECK(a.mask == b.mask);

  // Training permutations are drawn from the caller's generator.
  std::mt19937_64 r1(5), r2(5), r3(6);
  const auto t1 = pacsrnet_forward(x, prompt, p, PermPolicy::train, &r1);
  const auto t2 = pacsrnet_forward(x, prompt, p, PermPolicy::train, &r2);
  const auto t3 = pacsrnet_forward(x, prompt, p, PermPolicy::train, &r3);
  CHECK(t1.restored == t2.restored);
  CHECK_FALSE(t1.restored == t3.restored);
  CHECK(t1.mask == t3.mask);
  CHECK_THROWS_AS(pacsrnet_forward(x, prompt, p, PermPolicy::train, nullptr), ArgumentError);
}

TEST_CASE("zero removal head returns the input unchanged") {
  auto p = init_params<float>(small_config());
  const auto x = random_image(32, 32, 3);
  const auto prompt = Prompt::dot({16, 16});
  const auto before = pacsrnet_forward(x, prompt, p);
  p.tensors.at("removal.head.w").mutable_value().fill(0.0f);
  p.tensors.at("removal.head.b").mutable_value().fill(0.0f);
  const auto after = pacsrnet_forward(x, prompt, p);
  CHECK(after.restored == x);
  CHECK(after.mask == before.mask);
}

TEST_CASE("removal module validates its inputs") {
  const auto p = init_params<float>(small_config());
  const auto x = random_image(32, 32, 4);
  const auto pa = prompt_aware_forward(x, Prompt::dot({5, 5}), p);
  PermutationSource perms(PermPolicy::eval);
  CHECK_THROWS_AS(shadow_removal_forward(x, ShadowMask({1, 16, 32}), pa.guidance, p, perms), ArgumentError);
  CHECK_THROWS_AS(shadow_removal_forward(x, pa.mask, {pa.guidance[0]}, p, perms), ArgumentError);
  CHECK_THROWS_AS(shadow_removal_forward(x, pa.mask, {pa.guidance[1], pa.guidance[0]}, p, perms), ArgumentError);
  CHECK_THROWS_AS(shadow_removal_forward(random_image(48, 48, 4), ShadowMask({1, 48, 48}), pa.guidance, p, perms),
                  ArgumentError);
}

TEST_CASE("disable_guidance makes the removal module ignore guidance") {
  auto cfg = small_config();
  cfg.ablations.disable_guidance = true;
  const auto p = init_params<float>(cfg);
  for (const auto& name : p.guidance_projections()) {
    CHECK_FALSE(p.trainable(name + ".w"));
    for (float v : p.at(name + ".w").value().values()) CHECK(v == 0.0f);
  }
  const auto x = random_image(32, 32, 5);
  const auto pa = prompt_aware_forward(x, Prompt::dot({5, 5}), p);
  std::vector<Tensor<float>> noise;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0, 10);
  for (const auto& g : pa.guidance) {
    Tensor<float> t(g.shape());
    for (auto& v : t.values()) v = n(rng);
    noise.push_back(t);
  }
  PermutationSource e1(PermPolicy::eval), e2(PermPolicy::eval);
  CHECK(shadow_removal_forward(x, pa.mask, pa.guidance, p, e1) == shadow_removal_forward(x, pa.mask, noise, p, e2));
}

TEST_CASE("ablation flags own their tensors") {
  const auto full = init_params<float>(small_config());

  auto cfg = small_config();
  cfg.ablations.disable_sparse_branch = true;
  const auto nosparse = init_params<float>(cfg);
  CHECK(nosparse.tensors.size() == full.tensors.size());
  int frozen = 0;
  for (const auto& [name, v] : full.tensors) {
    const bool owned = name.ends_with(".omega2");
    if (owned) {
      ++frozen;
      CHECK_FALSE(nosparse.trainable(name));
      for (float w : nosparse.at(name).value().values()) CHECK(w == 0.0f);
    } else {
      CHECK(nosparse.at(name).value() == v.value());
    }
  }
  CHECK(frozen == 3);  // two encoder blocks + one decoder block

  cfg = small_config();
  cfg.ablations.disable_sfi = true;
  const auto nosfi = init_params<float>(cfg);
  for (const auto& [name, v] : nosfi.tensors) {
    CHECK(name.find(".sfi.") == std::string::npos);
    if (full.contains(name)) CHECK(full.at(name).value() == v.value());
    else CHECK(name.find("prompt.enc") == 0);
  }
  for (const auto& [name, v] : full.tensors)
    if (name.find(".sfi.") == std::string::npos) CHECK(nosfi.contains(name));
  const auto x = random_image(32, 32, 6);
  CHECK(pacsrnet_forward(x, Prompt::dot({4, 4}), nosfi).mask.shape() == Shape{1, 32, 32});
}

TEST_CASE("small network gradients match central differences") {
  const auto r = check_network_gradients(small_config(), 16, 20, 0);
  INFO("max rel err " << r.max_rel_error);
  CHECK(r.entries.size() == 20);
  CHECK(r.passed());
}

}  // TEST_SUITE
