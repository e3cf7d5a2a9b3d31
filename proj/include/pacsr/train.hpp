#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacsr/losses.hpp"
#include "pacsr/network.hpp"
#include "pacsr/scene.hpp"

namespace pacsr {

/// Ground truth for "remove the shadow of subject k": the shadow image with
/// that one layer undone. Other subjects' shadows stay in place.
struct Target {
  Image image;      // (3,H,W)
  ShadowMask mask;  // (1,H,W) the subject's shadow mask
};

/// Throws ArgumentError when `subject` is out of range.
Target construct_target(const SampleRecord& record, int subject);

/// Prompt of the requested kind for one subject of a record.
const Prompt& subject_prompt(const SubjectRecord& subject, PromptKind kind);

enum class PromptSampling { uniform, dot, line, mask };
std::string to_string(PromptSampling s);
PromptSampling parse_prompt_sampling(const std::string& s);

enum class LrSchedule { cosine, constant };

struct TrainConfig {
  NetworkConfig network;
  LossConfig loss;
  double learning_rate = 2e-4;
  int batch_size = 4;
  int max_steps = 2000;
  LrSchedule lr_schedule = LrSchedule::cosine;  // cosine decays to zero at max_steps
  PromptSampling prompt_sampling = PromptSampling::uniform;
  int checkpoint_every = 500;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_at(int step) const;  // step is 1-based
};

/// "ablations" may appear at the top level and is folded into network.ablations.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

struct StepLog {
  int step = 0;
  double lr = 0;
  LossTerms loss;
};

/// Bias-corrected Adam over the trainable tensors of a parameter set.
class Adam {
 public:
  Adam(const ModelParams<float>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ModelParams<float>& params, double lr);
  long long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::map<std::string, std::vector<float>> m_, v_;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<StepLog> log;
  std::filesystem::path checkpoint;  // final checkpoint, empty when out_dir was empty
};

using StepCallback = std::function<void(const StepLog&)>;

/// Runs the optimisation. When out_dir is non-empty it receives config.json,
/// loss_log.csv, checkpoint_step{N}.bin every checkpoint_every steps and
/// checkpoint.bin at the end. Throws NumericError naming the step on a
/// non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<SampleRecord>& data,
                  const std::filesystem::path& out_dir = {}, const StepCallback& on_step = {});

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& dataset_root,
                  const std::filesystem::path& out_dir, const StepCallback& on_step = {});

std::vector<StepLog> read_loss_log(const std::filesystem::path& csv);

}  // namespace pacsr
