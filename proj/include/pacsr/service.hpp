#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "pacsr/network.hpp"

namespace httplib {
class Server;
}

namespace pacsr {

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

struct ServiceOptions {
  int max_side = 1024;  // larger images are rejected with 413
};

/// Reflect-pads a (C,H,W) map on the bottom and right to the given size.
Tensor<float> reflect_pad(const Tensor<float>& x, int height, int width);
/// Top-left crop of a (C,H,W) map.
Tensor<float> crop(const Tensor<float>& x, int height, int width);

/// Forward pass on an image of any size: the image is reflect-padded to the
/// network's size multiple, a mask prompt is zero-padded, outputs are cropped back.
RemovalResult infer_any_size(const Image& image, const Prompt& prompt, const ModelParams<float>& params);

/// Parses the "prompt" object of a request. Masks arrive as base64 PNGs and
/// are binarised at 0.5. Throws ArgumentError or FormatError.
Prompt parse_prompt(const nlohmann::json& j, int height, int width);

/// Wire format of a prompt (inverse of parse_prompt).
nlohmann::json prompt_to_json(const Prompt& p);

/// POST /infer and GET /healthz. The handlers are plain functions of the
/// request body so they can be exercised without a socket.
class InferenceService {
 public:
  explicit InferenceService(ServiceOptions opts = {});
  ~InferenceService();

  void load(const std::filesystem::path& checkpoint);
  void load(ModelParams<float> params, std::string checkpoint_id);
  bool loaded() const;

  HttpReply infer(const std::string& body) const;
  HttpReply healthz() const;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port; throws std::runtime_error when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks until the server thread exits.
  void wait();
  void stop();

 private:
  struct Model {
    ModelParams<float> params;
    std::string checkpoint_id;
    std::string config_hash;
  };
  std::shared_ptr<const Model> model() const;
  void install_routes();

  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::shared_ptr<const Model> model_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<std::thread> thread_;
};

}  // namespace pacsr
