#pragma once

#include <filesystem>
#include <string>

#include "pacsr/network.hpp"

namespace pacsr {

/// Binary layout: "PACSRCK1", u64 header length, JSON header, then raw
/// little-endian float32 arrays at the offsets listed in the header.
void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

/// Throws FormatError naming the file on a bad magic, truncated data or a
/// parameter table that disagrees with the stored config.
ModelParams<float> load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

/// Stable short hash of the network config, used for identifying checkpoints.
std::string config_hash(const NetworkConfig& cfg);

}  // namespace pacsr
