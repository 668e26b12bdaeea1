#pragma once

#include <torch/torch.h>

#include "relight/flow_field.hpp"
#include "relight/image.hpp"

namespace relight {

struct WarpResult {
  torch::Tensor image;  // B x C x H x W, zero where invalid
  torch::Tensor valid;  // B x 1 x H x W in {0, 1}
};

// Backward-sampling bilinear warp: out(p) = image(p + flow(p)). A sample is
// valid when p + flow(p) lies inside [0, W-1] x [0, H-1]. image is
// B x C x H x W, flow is B x 2 x H x W (x displacement first). Differentiable
// in the image; linear in the image for a fixed flow.
WarpResult warp(const torch::Tensor& image, const torch::Tensor& flow);

struct ImageWarp {
  Image image;
  Image valid;
};
ImageWarp warp(const Image& image, const FlowField& flow);

// Mean over valid p of |fwd(p) + bwd(p + fwd(p))|. Zero for an exactly
// inverse pair of fields.
double cycle_inconsistency(const FlowField& fwd, const FlowField& bwd);

}  // namespace relight
