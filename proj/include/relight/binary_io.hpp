#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace relight {

// Raw little-endian float32 payloads (.f32).
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path);
// As read_f32, but throws FormatError unless exactly `expected` floats are present.
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

// Write to a sibling temporary, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace relight
