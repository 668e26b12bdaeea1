#include "relight/inference.hpp"

#include "relight/errors.hpp"
#include "relight/tensor_image.hpp"

namespace relight {

namespace {

std::vector<RelightResult> unpack(const RelightOutput& out) {
  std::vector<RelightResult> results;
  for (int64_t b = 0; b < out.image.size(0); ++b) {
    results.push_back({to_image(out.image[b]), to_light_map(out.source_light[b]), to_image(out.parsing[b])});
  }
  return results;
}

}  // namespace

Relighter::Relighter(RelightNet net, CheckpointInfo info)
    : net_(std::make_shared<RelightNet>(std::move(net))), info_(std::move(info)) {
  info_.model = (*net_)->config();
  (*net_)->eval();
}

Relighter Relighter::from_checkpoint(const std::filesystem::path& path) {
  auto loaded = load_checkpoint(path);
  return Relighter(loaded.net, loaded.info);
}

std::vector<RelightResult> Relighter::relight_batch(std::span<const Image> inputs,
                                                    std::span<const LightMap> targets) const {
  if (inputs.size() != targets.size() || inputs.empty()) throw ShapeError("relight: need one target light per image");
  for (const auto& img : inputs) {
    if (img.channels != 3 || img.height != config().height || img.width != config().width) {
      throw ShapeError("relight: expected a " + std::to_string(config().height) + "x" + std::to_string(config().width) +
                       " RGB image, got " + std::to_string(img.height) + "x" + std::to_string(img.width) + "x" +
                       std::to_string(img.channels));
    }
  }
  torch::InferenceMode guard;
  return unpack((*net_)->relight(stack_images(inputs), stack_lights(targets)));
}

RelightResult Relighter::relight(const Image& input, const LightMap& target) const {
  return relight_batch(std::span<const Image>(&input, 1), std::span<const LightMap>(&target, 1)).front();
}

RelightResult Relighter::reconstruct(const Image& input) const {
  if (input.channels != 3 || input.height != config().height || input.width != config().width) {
    throw ShapeError("reconstruct: image size does not match the model");
  }
  torch::InferenceMode guard;
  return unpack((*net_)->reconstruct(to_tensor(input).unsqueeze(0))).front();
}

RelightFn Relighter::as_fn() const {
  auto self = *this;
  return [self](const RelightQuery& q) { return self.relight(q.input, q.target).image; };
}

}  // namespace relight
