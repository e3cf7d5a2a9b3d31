#include "pacsr/service.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "pacsr/checkpoint.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/image_io.hpp"

namespace pacsr {

using nlohmann::json;

namespace {

// Mirror index without repeating the edge sample, folded as often as needed.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

HttpReply error_reply(int status, const std::string& message) { return {status, json{{"error", message}}.dump()}; }

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

Image overlay_mask(const Image& x, const ShadowMask& m) {
  constexpr float alpha = 0.4f;
  constexpr float tint[3] = {1.0f, 0.0f, 0.0f};
  Image out = x;
  const std::size_t plane = m.size();
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      const float a = alpha * m[i];
      out[c * plane + i] = (1 - a) * x[c * plane + i] + a * tint[c];
    }
  return out;
}

}  // namespace

Tensor<float> reflect_pad(const Tensor<float>& x, int height, int width) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (height < h || width < w) throw ArgumentError("reflect_pad: target smaller than input");
  Tensor<float> out({c, height, width});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < height; ++y)
      for (int xx = 0; xx < width; ++xx) out.at(ch, y, xx) = x.at(ch, reflect_index(y, h), reflect_index(xx, w));
  return out;
}

Tensor<float> crop(const Tensor<float>& x, int height, int width) {
  const int c = x.dim(0);
  if (height > x.dim(1) || width > x.dim(2)) throw ArgumentError("crop: target larger than input");
  Tensor<float> out({c, height, width});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < height; ++y)
      for (int xx = 0; xx < width; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx);
  return out;
}

RemovalResult infer_any_size(const Image& image, const Prompt& prompt, const ModelParams<float>& params) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ArgumentError("expected a (3,H,W) image, got " + shape_str(image.shape()));
  const int h = image.dim(1), w = image.dim(2);
  const int mult = params.config.size_multiple();
  const int ph = (h + mult - 1) / mult * mult, pw = (w + mult - 1) / mult * mult;
  rasterize(prompt, h, w);  // bounds are checked against the unpadded frame
  Prompt padded = prompt;
  if (padded.kind == PromptKind::subject_mask) {
    ShadowMask pm({1, ph, pw});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) pm.at(0, y, x) = prompt.mask.at(0, y, x);
    padded.mask = std::move(pm);
  }
  const RemovalResult out = pacsrnet_forward(reflect_pad(image, ph, pw), padded, params);
  return {crop(out.restored, h, w), crop(out.mask, h, w)};
}

Prompt parse_prompt(const json& j, int height, int width) {
  if (!j.is_object()) throw ArgumentError("prompt must be an object");
  if (!j.contains("kind")) throw ArgumentError("prompt.kind is required");
  Prompt p;
  p.kind = parse_prompt_kind(j.at("kind").get<std::string>());
  if (p.kind == PromptKind::subject_mask) {
    if (!j.contains("mask") || !j.at("mask").is_string()) throw ArgumentError("mask prompt needs a base64 'mask'");
    ShadowMask m = decode_png(base64_decode(j.at("mask").get<std::string>()), 1);
    for (auto& v : m.values()) v = v > 0.5f ? 1.0f : 0.0f;
    p.mask = std::move(m);
  } else {
    if (!j.contains("points") || !j.at("points").is_array()) throw ArgumentError("prompt.points must be an array");
    for (const auto& pt : j.at("points")) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        throw ArgumentError("prompt points must be [x, y] pairs");
      const double px = pt[0].get<double>(), py = pt[1].get<double>();
      if (px != std::floor(px) || py != std::floor(py))
        throw ArgumentError("prompt coordinate (" + pt[0].dump() + ", " + pt[1].dump() + ") is not integral");
      p.points.push_back({static_cast<int>(std::clamp(px, -1e9, 1e9)), static_cast<int>(std::clamp(py, -1e9, 1e9))});
    }
  }
  p.validate(height, width);
  return p;
}

json prompt_to_json(const Prompt& p) {
  json j{{"kind", to_string(p.kind)}};
  if (p.kind == PromptKind::subject_mask) {
    j["mask"] = base64_encode(encode_png(p.mask));
  } else {
    json pts = json::array();
    for (const auto& pt : p.points) pts.push_back({pt.x, pt.y});
    j["points"] = pts;
  }
  return j;
}

InferenceService::InferenceService(ServiceOptions opts) : opts_(opts) {}

InferenceService::~InferenceService() { stop(); }

void InferenceService::load(const std::filesystem::path& checkpoint) {
  load(load_checkpoint(checkpoint), hash_file(checkpoint));
}

void InferenceService::load(ModelParams<float> params, std::string checkpoint_id) {
  params.enable_grad(false);
  auto m = std::make_shared<Model>();
  m->config_hash = config_hash(params.config);
  m->params = std::move(params);
  m->checkpoint_id = std::move(checkpoint_id);
  std::lock_guard lock(mu_);
  model_ = std::move(m);
}

bool InferenceService::loaded() const { return model() != nullptr; }

std::shared_ptr<const InferenceService::Model> InferenceService::model() const {
  std::lock_guard lock(mu_);
  return model_;
}

HttpReply InferenceService::healthz() const {
  const auto m = model();
  if (!m) return {503, json{{"status", "loading"}}.dump()};
  return {200, json{{"status", "ok"}, {"checkpoint_id", m->checkpoint_id}, {"config_hash", m->config_hash}}.dump()};
}

HttpReply InferenceService::infer(const std::string& body) const {
  const auto m = model();
  if (!m) return error_reply(503, "model not loaded");
  const auto t0 = std::chrono::steady_clock::now();

  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, std::string("request is not valid JSON: ") + e.what());
  }

  Image image;
  Prompt prompt;
  bool return_mask = true, return_overlay = false;
  try {
    if (!req.is_object() || !req.contains("image") || !req.at("image").is_string())
      throw ArgumentError("request needs a base64 PNG 'image'");
    const auto bytes = base64_decode(req.at("image").get<std::string>());
    image = decode_png(bytes, 3);
    const int h = image.dim(1), w = image.dim(2);
    if (h > opts_.max_side || w > opts_.max_side)
      return error_reply(413, "image " + std::to_string(w) + "x" + std::to_string(h) + " exceeds the " +
                                  std::to_string(opts_.max_side) + "x" + std::to_string(opts_.max_side) + " limit");
    if (!req.contains("prompt")) throw ArgumentError("request needs a 'prompt'");
    prompt = parse_prompt(req.at("prompt"), h, w);
    if (req.contains("options")) {
      const auto& o = req.at("options");
      return_mask = o.value("return_mask", true);
      return_overlay = o.value("return_overlay", false);
    }
  } catch (const ArgumentError& e) {
    return error_reply(400, e.what());
  } catch (const FormatError& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed request: ") + e.what());
  }

  const int h = image.dim(1), w = image.dim(2);
  try {
    const RemovalResult out = infer_any_size(image, prompt, m->params);
    if (!out.restored.all_finite() || !out.mask.all_finite())
      throw NumericError("network produced non-finite values");
    const Image& restored = out.restored;
    const ShadowMask& mask = out.mask;

    json resp{{"width", w}, {"height", h}, {"removal", base64_encode(encode_png(restored))}};
    if (return_mask) resp["mask"] = base64_encode(encode_png(mask));
    if (return_overlay) resp["overlay"] = base64_encode(encode_png(overlay_mask(image, mask)));
    resp["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {200, resp.dump()};
  } catch (const NumericError& e) {
    return error_reply(500, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, std::string("inference failed: ") + e.what());
  }
}

void InferenceService::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  server_->Post("/infer", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, infer(req.body));
  });
  server_->Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
  server_->Options("/infer", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  // Base64 PNGs of 1024x1024 images fit comfortably.
  server_->set_payload_max_length(64u << 20);
}

int InferenceService::start(const std::string& host, int port) {
  install_routes();
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("could not bind " + host + ":" + std::to_string(port));
  thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void InferenceService::wait() {
  if (thread_ && thread_->joinable()) thread_->join();
}

void InferenceService::stop() {
  if (server_) server_->stop();
  if (thread_ && thread_->joinable()) thread_->join();
  thread_.reset();
}

}  // namespace pacsr
