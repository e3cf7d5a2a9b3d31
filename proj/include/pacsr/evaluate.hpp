#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacsr/dataset.hpp"
#include "pacsr/metrics.hpp"
#include "pacsr/network.hpp"

namespace pacsr {

struct EvalRow {
  std::string sample;
  int subject = 0;
  RegionReport report;
  double iou = 0;
  double bce = 0;
  double input_psnr = 0;  // all-region PSNR of the untouched shadow image against the target
};

struct EvalReport {
  PromptKind kind = PromptKind::dot;
  std::vector<EvalRow> rows;
  RegionReport mean;
  double mean_iou = 0;
  double mean_bce = 0;
  double mean_input_psnr = 0;
};

/// Runs the network in eval mode on every (sample, subject) pair with the
/// chosen prompt kind and scores it against construct_target. With
/// `oracle` set the targets themselves are scored as predictions, which
/// bounds the report from above.
EvalReport evaluate(const ModelParams<float>& params, const std::vector<DatasetEntry>& entries, PromptKind kind,
                    bool oracle = false);

/// Loads the checkpoint and split. Throws FormatError when the images do not
/// fit the checkpoint's network config.
EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset_root,
                    const std::string& split, PromptKind kind, bool oracle = false);

void to_json(nlohmann::json& j, const EvalRow& r);
void to_json(nlohmann::json& j, const EvalReport& r);

}  // namespace pacsr
