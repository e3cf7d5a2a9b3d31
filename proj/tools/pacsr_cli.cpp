// Command-line front end: data generation, training, evaluation, gradient
// checks, single-image inference and the HTTP service.
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 runtime or numeric failure.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pacsr/checkpoint.hpp"
#include "pacsr/dataset.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/evaluate.hpp"
#include "pacsr/grad_check.hpp"
#include "pacsr/image_io.hpp"
#include "pacsr/service.hpp"
#include "pacsr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pacsr;

namespace {

void write_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << j.dump(2) << "\n";
}

Prompt load_prompt_file(const fs::path& path, int height, int width) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing prompt file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed prompt file " + path.string() + ": " + e.what());
  }
  if (j.value("kind", std::string()) != "dot" && j.value("kind", std::string()) != "line" && j.contains("mask_file")) {
    fs::path mask_path = j.at("mask_file").get<std::string>();
    if (mask_path.is_relative()) mask_path = path.parent_path() / mask_path;
    ShadowMask m = read_png(mask_path, 1);
    for (auto& v : m.values()) v = v > 0.5f ? 1.0f : 0.0f;
    Prompt p = Prompt::subject_mask(std::move(m));
    p.validate(height, width);
    return p;
  }
  return parse_prompt(j, height, width);
}

// Input, mask (as gray) and removal side by side.
Image make_panel(const Image& x, const ShadowMask& m, const Image& y) {
  const int h = x.dim(1), w = x.dim(2), gap = 4;
  Image panel({3, h, 3 * w + 2 * gap}, 1.0f);
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) {
        panel.at(c, r, col) = x.at(c, r, col);
        panel.at(c, r, w + gap + col) = m.at(0, r, col);
        panel.at(c, r, 2 * (w + gap) + col) = y.at(c, r, col);
      }
  return panel;
}

InferenceService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-aware controllable shadow removal"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Synthesise train/val/test splits");
  SplitSpec split;
  std::string gen_out, background = "gradient";
  int size = 256;
  gen->add_option("--train", split.num_train, "Training samples")->capture_default_str();
  gen->add_option("--val", split.num_val, "Validation samples")->capture_default_str();
  gen->add_option("--test", split.num_test, "Test samples")->capture_default_str();
  gen->add_option("--seed", split.base_seed, "Base seed")->capture_default_str();
  gen->add_option("--size", size, "Image height and width")->capture_default_str();
  gen->add_option("--background", background, "gradient, noise or flat")->capture_default_str();
  gen->add_option("--blur", split.scene.shadow_blur_sigma, "Shadow feather sigma in pixels")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string train_config, train_data, train_out;
  int max_steps_override = 0;
  bool quiet = false;
  tr->add_option("--config", train_config, "JSON training config")->required();
  tr->add_option("--data", train_data, "Dataset root")->required();
  tr->add_option("--out", train_out, "Output directory")->required();
  tr->add_option("--max-steps", max_steps_override, "Override max_steps");
  tr->add_flag("--quiet", quiet, "Only print the final line");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_prompt = "dot", eval_out;
  bool oracle = false;
  ev->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", eval_data, "Dataset root")->required();
  ev->add_option("--split", eval_split, "Split name")->capture_default_str();
  ev->add_option("--prompt", eval_prompt, "dot, line or mask")->capture_default_str();
  ev->add_option("--out", eval_out, "Write the JSON report here instead of stdout");
  ev->add_flag("--oracle", oracle, "Score the targets themselves (upper bound)");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  std::string gc_config, gc_out;
  gc->add_option("--config", gc_config, "JSON network config (defaults otherwise)");
  gc->add_option("--out", gc_out, "Write the JSON report here");

  // infer
  auto* inf = app.add_subcommand("infer", "Remove one subject's shadow from an image");
  std::string inf_ckpt, inf_image, inf_prompt, inf_out;
  inf->add_option("--ckpt", inf_ckpt, "Checkpoint file")->required();
  inf->add_option("--image", inf_image, "Input PNG")->required();
  inf->add_option("--prompt-json", inf_prompt, "Prompt JSON")->required();
  inf->add_option("--out", inf_out, "Output directory")->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Serve POST /infer and GET /healthz");
  std::string sv_ckpt, sv_host = "127.0.0.1";
  int sv_port = 8080;
  ServiceOptions sv_opts;
  sv->add_option("--ckpt", sv_ckpt, "Checkpoint file")->required();
  sv->add_option("--port", sv_port, "Port")->capture_default_str();
  sv->add_option("--host", sv_host, "Bind address")->capture_default_str();
  sv->add_option("--max-side", sv_opts.max_side, "Largest accepted height or width")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      split.scene.height = split.scene.width = size;
      split.scene.background = parse_background(background);
      generate_split(split, gen_out);
      std::cout << "wrote " << split.num_train << "/" << split.num_val << "/" << split.num_test << " samples to "
                << gen_out << "\n";
    } else if (*tr) {
      TrainConfig cfg = load_train_config(train_config);
      if (max_steps_override > 0) cfg.max_steps = max_steps_override;
      const auto res = train(cfg, train_data, train_out, [&](const StepLog& s) {
        if (!quiet && (s.step == 1 || s.step % 50 == 0 || s.step == cfg.max_steps))
          std::printf("step %5d  lr %.3g  loss %.5f  (recon %.5f, mask %.5f)\n", s.step, s.lr, s.loss.total,
                      s.loss.reconstruction, s.loss.prediction);
        std::fflush(stdout);
      });
      std::cout << "final loss " << res.log.back().loss.total << ", checkpoint " << res.checkpoint.string() << "\n";
    } else if (*ev) {
      const auto rep = evaluate(eval_ckpt, eval_data, eval_split, parse_prompt_kind(eval_prompt), oracle);
      write_json(rep, eval_out);
      if (!eval_out.empty())
        std::printf("%s: iou %.4f  bce %.4f  psnr all %.3f (input %.3f)\n", eval_prompt.c_str(), rep.mean_iou,
                    rep.mean_bce, rep.mean.all.psnr, rep.mean_input_psnr);
    } else if (*gc) {
      NetworkConfig cfg;
      if (!gc_config.empty()) {
        std::ifstream in(gc_config);
        if (!in) throw FormatError("missing config file: " + gc_config);
        cfg = json::parse(in).get<NetworkConfig>();
      }
      const auto results = grad_check(cfg);
      for (const auto& r : results)
        std::printf("%-14s max rel err %.3e  (tol %.0e)  %s\n", r.label.c_str(), r.max_rel_error, r.tolerance,
                    r.passed() ? "PASS" : "FAIL");
      if (!gc_out.empty()) write_json(results, gc_out);
    } else if (*inf) {
      const ModelParams<float> params = load_checkpoint(inf_ckpt);
      const Image x = read_png(inf_image, 3);
      const Prompt prompt = load_prompt_file(inf_prompt, x.dim(1), x.dim(2));
      InferenceService svc;
      svc.load(params, "cli");
      json req{{"image", base64_encode(encode_png(x))}, {"prompt", prompt_to_json(prompt)},
               {"options", {{"return_mask", true}}}};
      const HttpReply r = svc.infer(req.dump());
      const json body = json::parse(r.body);
      if (r.status != 200) {
        std::cerr << "error: " << body.value("error", r.body) << "\n";
        return r.status >= 500 ? 2 : 1;
      }
      const Image y = decode_png(base64_decode(body.at("removal").get<std::string>()), 3);
      const ShadowMask m = decode_png(base64_decode(body.at("mask").get<std::string>()), 1);
      fs::create_directories(inf_out);
      write_png(fs::path(inf_out) / "removal.png", y);
      write_png(fs::path(inf_out) / "mask.png", m);
      write_png(fs::path(inf_out) / "panel.png", make_panel(x, m, y));
      std::cout << "wrote removal.png, mask.png and panel.png to " << inf_out << "\n";
    } else if (*sv) {
      InferenceService svc(sv_opts);
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = svc.start(sv_host, sv_port);
      std::cout << "listening on " << sv_host << ":" << port << "\n" << std::flush;
      svc.load(sv_ckpt);
      std::cout << "model loaded: " << json::parse(svc.healthz().body).dump() << "\n" << std::flush;
      svc.wait();
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
