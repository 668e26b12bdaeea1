#include "relight/flow.hpp"

#include "relight/errors.hpp"
#include "relight/tensor_image.hpp"

namespace relight {

WarpResult warp(const torch::Tensor& image, const torch::Tensor& flow) {
  if (image.dim() != 4 || flow.dim() != 4 || flow.size(1) != 2 || image.size(0) != flow.size(0) ||
      image.size(2) != flow.size(2) || image.size(3) != flow.size(3)) {
    throw ShapeError("warp: image must be B x C x H x W and flow B x 2 x H x W of the same size");
  }
  const auto b = image.size(0), c = image.size(1), h = image.size(2), w = image.size(3);
  const auto opts = flow.options();
  const auto gx = torch::arange(w, opts).view({1, 1, w}).expand({b, h, w});
  const auto gy = torch::arange(h, opts).view({1, h, 1}).expand({b, h, w});
  const auto sx = gx + flow.select(1, 0);
  const auto sy = gy + flow.select(1, 1);
  const auto valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1);

  const auto fx = sx.clamp(0, w - 1);
  const auto fy = sy.clamp(0, h - 1);
  const auto x0 = fx.floor();
  const auto y0 = fy.floor();
  const auto wx = (fx - x0).to(image.scalar_type()).unsqueeze(1);
  const auto wy = (fy - y0).to(image.scalar_type()).unsqueeze(1);
  const auto ix0 = x0.to(torch::kLong);
  const auto iy0 = y0.to(torch::kLong);
  const auto ix1 = (ix0 + 1).clamp_max(w - 1);
  const auto iy1 = (iy0 + 1).clamp_max(h - 1);

  const auto flat = image.reshape({b, c, h * w});
  auto gather = [&](const torch::Tensor& iy, const torch::Tensor& ix) {
    const auto idx = (iy * w + ix).reshape({b, 1, h * w}).expand({b, c, h * w});
    return flat.gather(2, idx).reshape({b, c, h, w});
  };
  const auto top = gather(iy0, ix0) * (1 - wx) + gather(iy0, ix1) * wx;
  const auto bottom = gather(iy1, ix0) * (1 - wx) + gather(iy1, ix1) * wx;
  const auto mask = valid.to(image.scalar_type()).unsqueeze(1);
  return {(top * (1 - wy) + bottom * wy) * mask, mask};
}

ImageWarp warp(const Image& image, const FlowField& flow) {
  if (image.height != flow.height || image.width != flow.width) throw ShapeError("warp: image and flow sizes differ");
  const auto result = warp(to_tensor(image).unsqueeze(0), to_tensor(flow).unsqueeze(0));
  return {to_image(result.image), to_image(result.valid)};
}

double cycle_inconsistency(const FlowField& fwd, const FlowField& bwd) {
  if (fwd.height != bwd.height || fwd.width != bwd.width) throw ShapeError("cycle_inconsistency: field sizes differ");
  const auto f = to_tensor(fwd).unsqueeze(0).to(torch::kFloat64);
  const auto back = warp(to_tensor(bwd).unsqueeze(0).to(torch::kFloat64), f);
  const auto err = (f + back.image).pow(2).sum(1, true).sqrt();
  const double count = back.valid.sum().item<double>();
  if (count == 0.0) return 0.0;
  return (err * back.valid).sum().item<double>() / count;
}

}  // namespace relight
