#pragma once

#include <span>

#include <torch/torch.h>

#include "relight/flow_field.hpp"
#include "relight/image.hpp"
#include "relight/lighting.hpp"

namespace relight {

// H x W x C image -> C x H x W float tensor (copy).
torch::Tensor to_tensor(const Image& image);
// N images of one shape -> N x C x H x W.
torch::Tensor stack_images(std::span<const Image> images);
// C x H x W (or 1 x C x H x W) tensor -> image.
Image to_image(const torch::Tensor& tensor);

// 768-vector, row-major (row, col, channel).
torch::Tensor to_tensor(const LightMap& map);
torch::Tensor stack_lights(std::span<const LightMap> maps);
// Validates non-negativity.
LightMap to_light_map(const torch::Tensor& tensor);

// 2 x H x W (x displacement first).
torch::Tensor to_tensor(const FlowField& flow);
FlowField to_flow(const torch::Tensor& tensor, FlowDirection direction);

// N x 768 maps -> N x 3 x 16 x 16 lat-long planes.
torch::Tensor light_planes(const torch::Tensor& lights);

}  // namespace relight
