#include "pacsr/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "pacsr/errors.hpp"

namespace pacsr {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

namespace {
constexpr char kMagic[8] = {'P', 'A', 'C', 'S', 'R', 'C', 'K', '1'};
}

std::string config_hash(const NetworkConfig& cfg) {
  const std::string text = json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const ModelParams<float>& params, const fs::path& path, const json& extra) {
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, var] : params.tensors) {
    const auto& v = var.value();
    table.push_back({{"name", name},
                     {"shape", v.shape()},
                     {"offset", offset},
                     {"dtype", "f32"},
                     {"frozen", !params.trainable(name)}});
    offset += v.size() * sizeof(float);
  }
  const json header = {{"config", params.config}, {"params", table}, {"data_bytes", offset}, {"extra", extra}};
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, var] : params.tensors) {
      const auto& v = var.value();
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

ModelParams<float> load_checkpoint(const fs::path& path, json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing checkpoint: " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  if (len > (1u << 30)) throw FormatError("corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint header: " + path.string());

  json header;
  NetworkConfig cfg;
  try {
    header = json::parse(text);
    cfg = header.at("config").get<NetworkConfig>();
  } catch (const json::exception& e) {
    throw FormatError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }

  // Start from a fresh init so the name set is checked against the architecture.
  ModelParams<float> params = init_params<float>(cfg);
  params.frozen.clear();
  std::vector<char> data(header.value("data_bytes", std::uint64_t{0}));
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in) throw FormatError("truncated checkpoint data: " + path.string());

  std::size_t seen = 0;
  try {
    for (const auto& entry : header.at("params")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (!params.contains(name)) throw FormatError("unexpected parameter '" + name + "' in " + path.string());
      auto& var = params.tensors.at(name);
      if (var.value().shape() != shape)
        throw FormatError("shape mismatch for '" + name + "' in " + path.string());
      const std::size_t bytes = shape_numel(shape) * sizeof(float);
      if (offset + bytes > data.size()) throw FormatError("parameter '" + name + "' out of range in " + path.string());
      std::memcpy(var.mutable_value().data(), data.data() + offset, bytes);
      if (entry.value("frozen", false)) params.frozen.insert(name);
      ++seen;
    }
    if (extra) *extra = header.value("extra", json::object());
  } catch (const json::exception& e) {
    throw FormatError("corrupt parameter table in " + path.string() + ": " + e.what());
  }
  if (seen != params.tensors.size()) throw FormatError("checkpoint is missing parameters: " + path.string());
  return params;
}

}  // namespace pacsr
