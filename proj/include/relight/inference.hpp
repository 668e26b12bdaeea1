#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "relight/checkpoint.hpp"
#include "relight/evaluation.hpp"
#include "relight/image.hpp"
#include "relight/lighting.hpp"
#include "relight/model.hpp"

namespace relight {

struct RelightResult {
  Image image;         // H x W x 3 in [0, 1]
  LightMap source_light;
  Image parsing;       // H x W x C_sem
};

// Read-only inference over a loaded network; safe to call concurrently.
class Relighter {
 public:
  explicit Relighter(RelightNet net, CheckpointInfo info = {});
  // Throws CheckpointError.
  static Relighter from_checkpoint(const std::filesystem::path& path);

  // Throws ShapeError unless the image is 3-channel at the configured size.
  RelightResult relight(const Image& input, const LightMap& target) const;
  std::vector<RelightResult> relight_batch(std::span<const Image> inputs, std::span<const LightMap> targets) const;
  // Reconstruction under the network's own light estimate.
  RelightResult reconstruct(const Image& input) const;

  RelightFn as_fn() const;
  const ModelConfig& config() const { return info_.model; }
  const CheckpointInfo& info() const { return info_; }

 private:
  std::shared_ptr<RelightNet> net_;
  CheckpointInfo info_;
};

}  // namespace relight
