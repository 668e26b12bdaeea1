#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "relight/image.hpp"

namespace relight {

// 8-bit PNG codec. Float images are quantized with round(clamp(v, 0, 1) * 255).
// Channel counts 1 (gray) and 3 (RGB) are supported; decoding converts
// palette/alpha/16-bit inputs to the requested channel count.
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes, int channels = 3);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path, int channels = 3);

// Size of a PNG from its header without decoding pixels.
struct PngInfo {
  int width = 0;
  int height = 0;
};
PngInfo probe_png(std::span<const std::uint8_t> bytes);

}  // namespace relight
