#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pacsr/scene.hpp"

namespace pacsr {

/// A record plus the seed that produced it.
struct DatasetEntry {
  std::string id;
  std::uint64_t seed = 0;
  SampleRecord record;
};

/// Writes root/{split}/{id}/... and rewrites root/index.json to include the split.
/// Layout per record: shadow.png, shadow_free.png, subject_{k}_mask.png,
/// subject_{k}_shadow.png and prompts.json.
void write_dataset(const std::vector<DatasetEntry>& entries, const std::filesystem::path& root,
                   const std::string& split = "train");

/// Reads every id listed for `split` in root/index.json. Missing or corrupt files
/// raise FormatError naming the file.
std::vector<DatasetEntry> read_dataset(const std::filesystem::path& root, const std::string& split = "train");

DatasetEntry read_record(const std::filesystem::path& dir);
void write_record(const DatasetEntry& entry, const std::filesystem::path& dir);

struct SplitSpec {
  int num_train = 200;
  int num_val = 20;
  int num_test = 20;
  std::uint64_t base_seed = 0;
  SceneConfig scene;  // seed field is overwritten per record
};

/// Seeds: train = [base, base+n_train), val and test follow consecutively, so
/// the three ranges are disjoint.
void generate_split(const SplitSpec& spec, const std::filesystem::path& root);

/// Ids listed in root/index.json for `split`.
std::vector<std::string> dataset_ids(const std::filesystem::path& root, const std::string& split);

}  // namespace pacsr
