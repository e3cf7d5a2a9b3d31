#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pacsr/prompt.hpp"

namespace pacsr {

/// 8-bit PNG encoding of a (1,H,W) or (3,H,W) map in [0,1]; values are rounded to k/255.
std::vector<std::uint8_t> encode_png(const Tensor<float>& img);
/// Decodes gray, gray+alpha, RGB or RGBA 8-bit PNGs. `channels` selects 1 (luma) or 3 outputs.
Tensor<float> decode_png(const std::vector<std::uint8_t>& bytes, int channels = 3);

void write_png(const std::filesystem::path& path, const Tensor<float>& img);
/// Throws FormatError naming the file when it is missing or unreadable.
Tensor<float> read_png(const std::filesystem::path& path, int channels = 3);

std::string base64_encode(const std::vector<std::uint8_t>& data);
/// Throws ArgumentError on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Rounds every value to the nearest k/255, matching what an 8-bit PNG stores.
Tensor<float> quantize_u8(const Tensor<float>& img);

}  // namespace pacsr
