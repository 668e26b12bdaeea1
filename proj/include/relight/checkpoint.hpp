#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "relight/model.hpp"

namespace relight {

// Single-file archive: "RLCKPT01", a little-endian uint64 header length, a
// JSON header (model config, step, metadata, tensor table) and the raw
// float32 little-endian tensor payload.
struct CheckpointInfo {
  ModelConfig model;
  std::int64_t step = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::string id;  // FNV-1a 64 of the file bytes, hex
};

// Written atomically. disc may be null.
void save_checkpoint(const std::filesystem::path& path, RelightNet& net, Discriminator* disc, std::int64_t step,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
  CheckpointInfo info;
  RelightNet net{nullptr};
  Discriminator disc{nullptr};  // null unless requested and present
};

// Throws CheckpointError on a missing or corrupt file, an unknown format
// version, or a tensor table that does not match the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, bool with_discriminator = false);

// Header only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

std::string fnv1a_hex(std::span<const char> bytes);

}  // namespace relight
