#include <doctest.h>

#include <httplib.h>

#include "pacsr/checkpoint.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/image_io.hpp"
#include "pacsr/scene.hpp"
#include "pacsr/service.hpp"
#include "test_util.hpp"

using namespace pacsr;
using nlohmann::json;

namespace {

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.base_channels = 8;
  cfg.num_scales = 2;
  cfg.blocks_per_scale = 1;
  cfg.token_len = 16;
  cfg.num_heads = 2;
  return cfg;
}

Image scene_image(int h, int w) {
  SceneConfig s;
  s.height = h;
  s.width = w;
  s.seed = 3;
  return synth_scene(s).shadow_image;
}

std::string request(const Image& img, const json& prompt, json options = json::object()) {
  return json{{"image", base64_encode(encode_png(img))}, {"prompt", prompt}, {"options", options}}.dump();
}

json payload(const HttpReply& r) {
  auto j = json::parse(r.body);
  j.erase("timing_ms");
  return j;
}

Tensor<float> decode_field(const json& j, const char* key, int channels) {
  return decode_png(base64_decode(j.at(key).get<std::string>()), channels);
}

}  // namespace

TEST_SUITE("inference_service") {

TEST_CASE("health before and after load") {
  InferenceService svc;
  CHECK(svc.healthz().status == 503);
  CHECK(svc.infer("{}").status == 503);
  svc.load(init_params<float>(small_config()), "seed0");
  const auto h = svc.healthz();
  CHECK(h.status == 200);
  const auto j = json::parse(h.body);
  CHECK(j.at("checkpoint_id") == "seed0");
  CHECK(j.at("config_hash") == config_hash(small_config()));
}

TEST_CASE("checkpoint id and config hash survive a restart") {
  testutil::TempDir tmp("pacsr_svc");
  save_checkpoint(init_params<float>(small_config()), tmp / "c.bin");
  InferenceService a, b;
  a.load(tmp / "c.bin");
  b.load(tmp / "c.bin");
  CHECK_FALSE(json::parse(a.healthz().body).at("checkpoint_id").get<std::string>().empty());
  CHECK(a.healthz().body == b.healthz().body);
}

TEST_CASE("each prompt kind returns correctly sized deterministic output") {
  InferenceService svc;
  svc.load(init_params<float>(small_config()), "t");
  const auto img = scene_image(32, 48);
  ShadowMask mask({1, 32, 48});
  for (int y = 4; y < 12; ++y)
    for (int x = 6; x < 20; ++x) mask.at(0, y, x) = 1.0f;
  for (const auto& prompt : {prompt_to_json(Prompt::dot({10, 8})), prompt_to_json(Prompt::line({{2, 3}, {40, 30}})),
                             prompt_to_json(Prompt::subject_mask(mask))}) {
    const auto body = request(img, prompt, {{"return_overlay", true}});
    const auto r1 = svc.infer(body), r2 = svc.infer(body);
    REQUIRE(r1.status == 200);
    CHECK(payload(r1) == payload(r2));
    const auto j = json::parse(r1.body);
    CHECK(j.at("width") == 48);
    CHECK(j.at("height") == 32);
    CHECK(j.at("timing_ms").get<double>() >= 0);
    CHECK(decode_field(j, "removal", 3).shape() == Shape{3, 32, 48});
    CHECK(decode_field(j, "mask", 1).shape() == Shape{1, 32, 48});
    CHECK(decode_field(j, "overlay", 3).shape() == Shape{3, 32, 48});
  }
  const auto no_mask = json::parse(svc.infer(request(img, prompt_to_json(Prompt::dot({1, 1})),
                                                     {{"return_mask", false}})).body);
  CHECK_FALSE(no_mask.contains("mask"));
  CHECK_FALSE(no_mask.contains("overlay"));
}

TEST_CASE("odd sizes are padded and cropped back") {
  InferenceService svc;
  const auto params = init_params<float>(small_config());
  svc.load(params, "t");
  for (auto [h, w] : {std::pair{17, 23}, std::pair{5, 40}, std::pair{33, 16}}) {
    const auto img = scene_image(std::max(h, 16), std::max(w, 16));
    const auto cut = crop(img, h, w);
    const auto r = svc.infer(request(cut, prompt_to_json(Prompt::dot({w / 2, h / 2}))));
    REQUIRE(r.status == 200);
    const auto removal = decode_field(json::parse(r.body), "removal", 3);
    CHECK(removal.shape() == Shape{3, h, w});
  }
  // Already aligned: identical to the direct forward, up to 8-bit encoding.
  const auto img = quantize_u8(scene_image(32, 32));
  const auto r = svc.infer(request(img, prompt_to_json(Prompt::dot({9, 9}))));
  const auto direct = pacsrnet_forward(img, Prompt::dot({9, 9}), params);
  CHECK(decode_field(json::parse(r.body), "removal", 3) == quantize_u8(direct.restored));
}

TEST_CASE("reflect padding") {
  Tensor<float> x({1, 1, 3}, std::vector<float>{1, 2, 3});
  const auto p = reflect_pad(x, 1, 8);
  CHECK(std::vector<float>(p.values().begin(), p.values().end()) == std::vector<float>{1, 2, 3, 2, 1, 2, 3, 2});
  CHECK(crop(p, 1, 3) == x);
  CHECK_THROWS_AS(reflect_pad(x, 1, 2), ArgumentError);
}

TEST_CASE("malformed requests are rejected with 400") {
  InferenceService svc;
  svc.load(init_params<float>(small_config()), "t");
  const auto img = scene_image(32, 32);
  const auto bad_dot = svc.infer(request(img, json{{"kind", "dot"}, {"points", {{-1, 5}}}}));
  CHECK(bad_dot.status == 400);
  CHECK(json::parse(bad_dot.body).at("error").get<std::string>().find("(-1, 5)") != std::string::npos);

  const std::vector<std::string> bodies = {
      "not json",
      json{{"prompt", {{"kind", "dot"}, {"points", {{1, 1}}}}}}.dump(),
      json{{"image", "@@@"}, {"prompt", {{"kind", "dot"}, {"points", {{1, 1}}}}}}.dump(),
      json{{"image", base64_encode({1, 2, 3})}, {"prompt", {{"kind", "dot"}, {"points", {{1, 1}}}}}}.dump(),
      request(img, json{{"kind", "box"}, {"points", {{1, 1}}}}),
      request(img, json{{"kind", "dot"}}),
      request(img, json{{"kind", "dot"}, {"points", {{1.5, 1}}}}),
      request(img, json{{"kind", "dot"}, {"points", {{1, 1}, {2, 2}}}}),
      request(img, json{{"kind", "line"}, {"points", {{1, 1}}}}),
      request(img, json{{"kind", "line"}, {"points", {{1, 1}, {32, 2}}}}),
      request(img, json{{"kind", "mask"}, {"mask", base64_encode(encode_png(ShadowMask({1, 32, 32})))}}),
      request(img, json{{"kind", "mask"}, {"mask", base64_encode(encode_png(ShadowMask({1, 16, 32}, 1.0f)))}}),
      request(img, json{{"kind", "dot"}, {"points", "1,1"}}),
  };
  for (const auto& b : bodies) {
    const auto r = svc.infer(b);
    INFO(b.substr(0, 80));
    CHECK(r.status == 400);
    CHECK(json::parse(r.body).contains("error"));
  }
}

TEST_CASE("oversized images get 413") {
  InferenceService svc(ServiceOptions{64});
  svc.load(init_params<float>(small_config()), "t");
  const auto r = svc.infer(request(Image({3, 16, 80}), prompt_to_json(Prompt::dot({1, 1}))));
  CHECK(r.status == 413);
  CHECK(svc.infer(request(Image({3, 16, 64}), prompt_to_json(Prompt::dot({1, 1})))).status == 200);
}

TEST_CASE("prompt wire format round trip") {
  ShadowMask m({1, 8, 8});
  m.at(0, 2, 3) = 1.0f;
  for (const auto& p : {Prompt::dot({3, 4}), Prompt::line({{0, 0}, {7, 7}, {2, 5}}), Prompt::subject_mask(m)})
    CHECK(parse_prompt(prompt_to_json(p), 8, 8) == p);
  CHECK(prompt_to_json(Prompt::dot({3, 4})) == json::parse(R"({"kind":"dot","points":[[3,4]]})"));
}

TEST_CASE("http round trip") {
  InferenceService svc;
  const int port = svc.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(60, 0);
  auto h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 503);
  svc.load(init_params<float>(small_config()), "live");
  h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(h->get_header_value("Access-Control-Allow-Origin") == "*");

  const auto img = scene_image(32, 32);
  const auto body = request(img, prompt_to_json(Prompt::dot({16, 16})));
  const auto r = cli.Post("/infer", body, "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto via_http = json::parse(r->body);
  via_http.erase("timing_ms");
  CHECK(via_http == payload(svc.infer(body)));

  const auto bad = cli.Post("/infer", request(img, json{{"kind", "dot"}, {"points", {{99, 1}}}}), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  svc.stop();
}

}  // TEST_SUITE
