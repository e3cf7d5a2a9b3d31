#include "pacsr/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pacsr/errors.hpp"
#include "pacsr/image_io.hpp"

namespace pacsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json point_json(const Point& p) { return json::array({p.x, p.y}); }

Point parse_point(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("corrupt JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string make_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace

void write_record(const DatasetEntry& entry, const fs::path& dir) {
  fs::create_directories(dir);
  const SampleRecord& r = entry.record;
  write_png(dir / "shadow.png", r.shadow_image);
  write_png(dir / "shadow_free.png", r.shadow_free_image);
  json subjects = json::array();
  for (std::size_t k = 0; k < r.subjects.size(); ++k) {
    const auto& s = r.subjects[k];
    const std::string mask_name = "subject_" + std::to_string(k) + "_mask.png";
    write_png(dir / mask_name, s.subject_mask);
    write_png(dir / ("subject_" + std::to_string(k) + "_shadow.png"), s.shadow_mask);
    json line = json::array();
    for (const auto& p : s.line.points) line.push_back(point_json(p));
    subjects.push_back({{"dot", point_json(s.dot.points.at(0))},
                        {"line", line},
                        {"mask", mask_name},
                        {"darkening", s.darkening}});
  }
  json prompts = {{"subjects", subjects}, {"shadow_blur_sigma", r.shadow_blur_sigma}, {"seed", entry.seed}};
  write_text(dir / "prompts.json", prompts.dump(2) + "\n");
}

DatasetEntry read_record(const fs::path& dir) {
  DatasetEntry e;
  e.id = dir.filename().string();
  const fs::path prompts_path = dir / "prompts.json";
  const json prompts = read_json(prompts_path);
  SampleRecord& r = e.record;
  r.shadow_image = read_png(dir / "shadow.png", 3);
  r.shadow_free_image = read_png(dir / "shadow_free.png", 3);
  const int h = r.shadow_image.dim(1), w = r.shadow_image.dim(2);
  if (r.shadow_free_image.shape() != r.shadow_image.shape())
    throw FormatError("size mismatch between shadow.png and shadow_free.png in " + dir.string());
  try {
    e.seed = prompts.value("seed", std::uint64_t{0});
    r.shadow_blur_sigma = prompts.value("shadow_blur_sigma", 0.0);
    const auto& subjects = prompts.at("subjects");
    for (std::size_t k = 0; k < subjects.size(); ++k) {
      const json& js = subjects[k];
      SubjectRecord s;
      const fs::path mask_path = dir / js.at("mask").get<std::string>();
      s.subject_mask = read_png(mask_path, 1);
      const fs::path shadow_path = dir / ("subject_" + std::to_string(k) + "_shadow.png");
      s.shadow_mask = read_png(shadow_path, 1);
      if (s.subject_mask.dim(1) != h || s.subject_mask.dim(2) != w)
        throw FormatError("size mismatch in " + mask_path.string());
      if (s.shadow_mask.dim(1) != h || s.shadow_mask.dim(2) != w)
        throw FormatError("size mismatch in " + shadow_path.string());
      s.dot = Prompt::dot(parse_point(js.at("dot")));
      std::vector<Point> pts;
      for (const auto& p : js.at("line")) pts.push_back(parse_point(p));
      s.line = Prompt::line(std::move(pts));
      s.mask_prompt = Prompt::subject_mask(s.subject_mask);
      s.darkening = js.value("darkening", 1.0);
      r.subjects.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw FormatError("malformed " + prompts_path.string() + ": " + ex.what());
  } catch (const ArgumentError& ex) {
    throw FormatError("invalid prompt in " + prompts_path.string() + ": " + ex.what());
  }
  return e;
}

std::vector<std::string> dataset_ids(const fs::path& root, const std::string& split) {
  const fs::path index_path = root / "index.json";
  const json index = read_json(index_path);
  try {
    return index.at("splits").at(split).at("ids").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw FormatError("split '" + split + "' not listed in " + index_path.string());
  }
}

void write_dataset(const std::vector<DatasetEntry>& entries, const fs::path& root, const std::string& split) {
  fs::create_directories(root / split);
  json ids = json::array();
  std::uint64_t lo = UINT64_MAX, hi = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string id = entries[i].id.empty() ? make_id(i) : entries[i].id;
    write_record(entries[i], root / split / id);
    ids.push_back(id);
    lo = std::min(lo, entries[i].seed);
    hi = std::max(hi, entries[i].seed);
  }
  const fs::path index_path = root / "index.json";
  json index = fs::exists(index_path) ? read_json(index_path) : json{{"splits", json::object()}};
  json entry = {{"ids", ids}};
  if (!entries.empty()) entry["seed_range"] = {lo, hi + 1};
  index["splits"][split] = entry;
  write_text(index_path, index.dump(2) + "\n");
}

std::vector<DatasetEntry> read_dataset(const fs::path& root, const std::string& split) {
  std::vector<DatasetEntry> out;
  for (const auto& id : dataset_ids(root, split)) out.push_back(read_record(root / split / id));
  return out;
}

void generate_split(const SplitSpec& spec, const fs::path& root) {
  if (spec.num_train < 1 || spec.num_val < 1 || spec.num_test < 1)
    throw ArgumentError("split sizes must be at least 1");
  std::uint64_t seed = spec.base_seed;
  const std::pair<const char*, int> splits[] = {
      {"train", spec.num_train}, {"val", spec.num_val}, {"test", spec.num_test}};
  for (const auto& [name, n] : splits) {
    std::vector<DatasetEntry> entries;
    entries.reserve(n);
    for (int i = 0; i < n; ++i) {
      SceneConfig cfg = spec.scene;
      cfg.seed = seed++;
      entries.push_back({make_id(i), cfg.seed, synth_scene(cfg)});
    }
    write_dataset(entries, root, name);
  }
}

}  // namespace pacsr
