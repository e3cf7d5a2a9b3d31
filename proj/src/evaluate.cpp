#include "pacsr/evaluate.hpp"

#include "pacsr/checkpoint.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/train.hpp"

namespace pacsr {

EvalReport evaluate(const ModelParams<float>& params, const std::vector<DatasetEntry>& entries, PromptKind kind,
                    bool oracle) {
  EvalReport rep;
  rep.kind = kind;
  for (const auto& e : entries) {
    const SampleRecord& r = e.record;
    if (!oracle) {
      try {
        params.config.validate_input(r.shadow_image.dim(1), r.shadow_image.dim(2));
      } catch (const ArgumentError& ex) {
        throw FormatError("sample " + e.id + " does not fit the checkpoint config: " + ex.what());
      }
    }
    for (int k = 0; k < static_cast<int>(r.subjects.size()); ++k) {
      const Target t = construct_target(r, k);
      RemovalResult out;
      if (oracle)
        out = {t.image, t.mask};
      else
        out = pacsrnet_forward(r.shadow_image, subject_prompt(r.subjects[k], kind), params);
      EvalRow row;
      row.sample = e.id;
      row.subject = k;
      row.report = region_report(out.restored, t.image, t.mask);
      row.iou = mask_iou(out.mask, t.mask);
      row.bce = mask_bce(out.mask, t.mask);
      row.input_psnr = psnr(r.shadow_image, t.image);
      rep.rows.push_back(row);
    }
  }
  if (rep.rows.empty()) return rep;

  auto acc = [](RegionMetrics& dst, const RegionMetrics& src) {
    dst.psnr += src.psnr;
    dst.ssim += src.ssim;
    dst.rmse += src.rmse;
  };
  for (const auto& row : rep.rows) {
    acc(rep.mean.shadow, row.report.shadow);
    acc(rep.mean.non_shadow, row.report.non_shadow);
    acc(rep.mean.all, row.report.all);
    rep.mean_iou += row.iou;
    rep.mean_bce += row.bce;
    rep.mean_input_psnr += row.input_psnr;
  }
  const double n = static_cast<double>(rep.rows.size());
  for (RegionMetrics* m : {&rep.mean.shadow, &rep.mean.non_shadow, &rep.mean.all}) {
    m->psnr /= n;
    m->ssim /= n;
    m->rmse /= n;
  }
  rep.mean_iou /= n;
  rep.mean_bce /= n;
  rep.mean_input_psnr /= n;
  return rep;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset_root,
                    const std::string& split, PromptKind kind, bool oracle) {
  const ModelParams<float> params = load_checkpoint(checkpoint);
  return evaluate(params, read_dataset(dataset_root, split), kind, oracle);
}

void to_json(nlohmann::json& j, const EvalRow& r) {
  j = r.report;
  j["sample"] = r.sample;
  j["subject"] = r.subject;
  j["iou"] = r.iou;
  j["bce"] = r.bce;
  j["input_psnr"] = r.input_psnr;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json mean = r.mean;
  mean["iou"] = r.mean_iou;
  mean["bce"] = r.mean_bce;
  mean["input_psnr"] = r.mean_input_psnr;
  j = {{"prompt", to_string(r.kind)}, {"count", r.rows.size()}, {"mean", mean}, {"rows", r.rows}};
}

}  // namespace pacsr
