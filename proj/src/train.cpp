#include "pacsr/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pacsr/checkpoint.hpp"
#include "pacsr/dataset.hpp"
#include "pacsr/errors.hpp"

namespace pacsr {

namespace fs = std::filesystem;
using nlohmann::json;

Target construct_target(const SampleRecord& record, int subject) {
  if (subject < 0 || subject >= static_cast<int>(record.subjects.size()))
    throw ArgumentError("construct_target: subject index " + std::to_string(subject) + " out of range [0, " +
                        std::to_string(record.subjects.size()) + ")");
  return {composite_shadows(record, subject), record.subjects[subject].shadow_mask};
}

const Prompt& subject_prompt(const SubjectRecord& subject, PromptKind kind) {
  switch (kind) {
    case PromptKind::dot:
      return subject.dot;
    case PromptKind::line:
      return subject.line;
    case PromptKind::subject_mask:
      return subject.mask_prompt;
  }
  throw ArgumentError("unknown prompt kind");
}

std::string to_string(PromptSampling s) {
  switch (s) {
    case PromptSampling::uniform:
      return "uniform";
    case PromptSampling::dot:
      return "dot";
    case PromptSampling::line:
      return "line";
    case PromptSampling::mask:
      return "mask";
  }
  return "?";
}

PromptSampling parse_prompt_sampling(const std::string& s) {
  if (s == "uniform") return PromptSampling::uniform;
  if (s == "dot") return PromptSampling::dot;
  if (s == "line") return PromptSampling::line;
  if (s == "mask" || s == "subject_mask") return PromptSampling::mask;
  throw ArgumentError("unknown prompt sampling '" + s + "'");
}

void TrainConfig::validate() const {
  network.validate();
  loss.validate();
  if (!(learning_rate > 0)) throw ArgumentError("learning_rate must be positive");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (max_steps < 1) throw ArgumentError("max_steps must be at least 1");
  if (checkpoint_every < 1) throw ArgumentError("checkpoint_every must be at least 1");
}

double TrainConfig::lr_at(int step) const {
  if (lr_schedule == LrSchedule::constant) return learning_rate;
  return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * (step - 1) / max_steps));
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"network", c.network},
       {"loss", {{"lambda_re", c.loss.lambda_re}}},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"max_steps", c.max_steps},
       {"lr_schedule", c.lr_schedule == LrSchedule::cosine ? "cosine" : "constant"},
       {"prompt_sampling", to_string(c.prompt_sampling)},
       {"checkpoint_every", c.checkpoint_every},
       {"ablations", c.network.ablations},
       {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known = {"network", "loss",          "learning_rate",    "batch_size",
                                              "max_steps", "lr_schedule", "prompt_sampling", "checkpoint_every",
                                              "ablations", "seed"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ArgumentError("unknown training config field '" + key + "'");
  c = TrainConfig{};
  if (j.contains("network")) c.network = j.at("network").get<NetworkConfig>();
  if (j.contains("loss")) c.loss.lambda_re = j.at("loss").value("lambda_re", c.loss.lambda_re);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  const std::string sched = j.value("lr_schedule", std::string("cosine"));
  if (sched == "cosine")
    c.lr_schedule = LrSchedule::cosine;
  else if (sched == "constant")
    c.lr_schedule = LrSchedule::constant;
  else
    throw ArgumentError("unknown lr_schedule '" + sched + "'");
  c.prompt_sampling = parse_prompt_sampling(j.value("prompt_sampling", std::string("uniform")));
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("ablations")) c.network.ablations = j.at("ablations").get<Ablations>();
  c.seed = j.value("seed", c.seed);
  if (!j.contains("network") || !j.at("network").contains("seed")) c.network.seed = c.seed;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed config " + path.string() + ": " + e.what());
  }
  try {
    return j.get<TrainConfig>();
  } catch (const json::exception& e) {
    throw ArgumentError("invalid config " + path.string() + ": " + e.what());
  }
}

Adam::Adam(const ModelParams<float>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, var] : params.tensors) {
    if (!params.trainable(name)) continue;
    m_[name].assign(var.value().size(), 0.0f);
    v_[name].assign(var.value().size(), 0.0f);
  }
}

void Adam::step(ModelParams<float>& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_);
  for (auto& [name, var] : params.tensors) {
    if (!params.trainable(name) || var.grad().empty()) continue;
    auto& m = m_.at(name);
    auto& v = v_.at(name);
    const auto& g = var.grad();
    auto& p = var.mutable_value();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

namespace {

void write_log_row(std::ofstream& out, const StepLog& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", s.step, s.lr, s.loss.total, s.loss.reconstruction,
                s.loss.prediction);
  out << buf;
  out.flush();
}

PromptKind draw_kind(PromptSampling s, std::mt19937_64& rng) {
  switch (s) {
    case PromptSampling::dot:
      return PromptKind::dot;
    case PromptSampling::line:
      return PromptKind::line;
    case PromptSampling::mask:
      return PromptKind::subject_mask;
    case PromptSampling::uniform:
      break;
  }
  static constexpr PromptKind kinds[] = {PromptKind::dot, PromptKind::line, PromptKind::subject_mask};
  return kinds[std::uniform_int_distribution<int>(0, 2)(rng)];
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<SampleRecord>& data, const fs::path& out_dir,
                  const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw ArgumentError("train: empty dataset");
  const int h = data[0].shadow_image.dim(1), w = data[0].shadow_image.dim(2);
  cfg.network.validate_input(h, w);
  for (const auto& r : data) {
    if (r.shadow_image.dim(1) != h || r.shadow_image.dim(2) != w)
      throw ArgumentError("train: all samples must share one image size");
    if (r.subjects.empty()) throw ArgumentError("train: sample without subjects");
  }

  TrainResult result{init_params<float>(cfg.network), {}, {}};
  ModelParams<float>& params = result.params;
  params.enable_grad(true);
  Adam adam(params);
  std::mt19937_64 rng(cfg.seed);

  std::ofstream log_file;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "config.json") << json(cfg).dump(2) << "\n";
    log_file.open(out_dir / "loss_log.csv");
    if (!log_file) throw std::runtime_error("cannot write " + (out_dir / "loss_log.csv").string());
    log_file << "step,lr,total,reconstruction,prediction\n";
  }

  const int n = cfg.batch_size;
  const std::size_t img = 3ull * h * w, plane = 1ull * h * w;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    Tensor<float> x({n, 3, h, w}), c({n, 1, h, w}), y({n, 3, h, w}), m({n, 1, h, w});
    for (int b = 0; b < n; ++b) {
      const auto& rec = data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
      const int k = std::uniform_int_distribution<int>(0, static_cast<int>(rec.subjects.size()) - 1)(rng);
      const PromptKind kind = draw_kind(cfg.prompt_sampling, rng);
      const Target t = construct_target(rec, k);
      const ShadowMask map = rasterize(subject_prompt(rec.subjects[k], kind), h, w);
      std::copy_n(rec.shadow_image.data(), img, x.data() + b * img);
      std::copy_n(t.image.data(), img, y.data() + b * img);
      std::copy_n(map.data(), plane, c.data() + b * plane);
      std::copy_n(t.mask.data(), plane, m.data() + b * plane);
    }

    PermutationSource perms(PermPolicy::train, &rng);
    const auto out = ag::pacsrnet(ag::Var<float>(std::move(x)), ag::Var<float>(std::move(c)), params, perms);
    const auto loss = ag::loss_total(out.restored, y, out.mask, m, cfg.loss);
    StepLog entry{step, cfg.lr_at(step),
                  {loss.total.value()[0], loss.reconstruction.value()[0], loss.prediction.value()[0]}};
    if (!std::isfinite(entry.loss.total))
      throw NumericError("non-finite training loss at step " + std::to_string(step));
    ag::backward(loss.total);
    adam.step(params, entry.lr);
    params.zero_grad();

    result.log.push_back(entry);
    if (log_file.is_open()) write_log_row(log_file, entry);
    if (on_step) on_step(entry);
    if (!out_dir.empty() && step % cfg.checkpoint_every == 0 && step != cfg.max_steps)
      save_checkpoint(params, out_dir / ("checkpoint_step" + std::to_string(step) + ".bin"), {{"step", step}});
  }

  params.enable_grad(false);
  if (!out_dir.empty()) {
    result.checkpoint = out_dir / "checkpoint.bin";
    save_checkpoint(params, result.checkpoint, {{"step", cfg.max_steps}, {"train_config", cfg}});
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const fs::path& dataset_root, const fs::path& out_dir,
                  const StepCallback& on_step) {
  std::vector<SampleRecord> data;
  for (auto& e : read_dataset(dataset_root, "train")) data.push_back(std::move(e.record));
  return train(cfg, data, out_dir, on_step);
}

std::vector<StepLog> read_loss_log(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw FormatError("missing loss log: " + csv.string());
  std::vector<StepLog> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepLog s;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &s.step, &s.lr, &s.loss.total, &s.loss.reconstruction,
                    &s.loss.prediction) != 5)
      throw FormatError("malformed row in " + csv.string() + ": " + line);
    rows.push_back(s);
  }
  return rows;
}

}  // namespace pacsr
