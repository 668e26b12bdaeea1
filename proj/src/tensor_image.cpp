#include "relight/tensor_image.hpp"

#include "relight/errors.hpp"

namespace relight {

torch::Tensor to_tensor(const Image& image) {
  auto t = torch::from_blob(const_cast<float*>(image.data.data()), {image.height, image.width, image.channels},
                            torch::kFloat32);
  return t.permute({2, 0, 1}).clone(torch::MemoryFormat::Contiguous);
}

torch::Tensor stack_images(std::span<const Image> images) {
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& image : images) {
    if (!image.same_shape(images.front())) throw ShapeError("stack_images: mixed image shapes");
    parts.push_back(to_tensor(image));
  }
  return torch::stack(parts);
}

Image to_image(const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU, torch::kFloat32);
  if (t.dim() == 4) {
    if (t.size(0) != 1) throw ShapeError("to_image: batch dimension must be 1");
    t = t[0];
  }
  if (t.dim() != 3) throw ShapeError("to_image: expected C x H x W");
  t = t.permute({1, 2, 0}).contiguous();
  Image image(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
  std::memcpy(image.data.data(), t.data_ptr<float>(), image.data.size() * sizeof(float));
  return image;
}

torch::Tensor to_tensor(const LightMap& map) {
  return torch::from_blob(const_cast<float*>(map.values().data()), {kLightSize}, torch::kFloat32).clone();
}

torch::Tensor stack_lights(std::span<const LightMap> maps) {
  std::vector<torch::Tensor> parts;
  parts.reserve(maps.size());
  for (const auto& m : maps) parts.push_back(to_tensor(m));
  return torch::stack(parts);
}

LightMap to_light_map(const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous().reshape({-1});
  if (t.numel() != kLightSize) throw ShapeError("to_light_map: expected 768 values");
  return LightMap::from_values(std::span<const float>(t.data_ptr<float>(), kLightSize));
}

torch::Tensor to_tensor(const FlowField& flow) {
  auto t = torch::from_blob(const_cast<float*>(flow.vectors.data()), {flow.height, flow.width, 2}, torch::kFloat32);
  return t.permute({2, 0, 1}).clone(torch::MemoryFormat::Contiguous);
}

FlowField to_flow(const torch::Tensor& tensor, FlowDirection direction) {
  auto t = tensor.detach().to(torch::kCPU, torch::kFloat32);
  if (t.dim() != 3 || t.size(0) != 2) throw ShapeError("to_flow: expected 2 x H x W");
  t = t.permute({1, 2, 0}).contiguous();
  FlowField flow(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), direction);
  std::memcpy(flow.vectors.data(), t.data_ptr<float>(), flow.vectors.size() * sizeof(float));
  return flow;
}

torch::Tensor light_planes(const torch::Tensor& lights) {
  return lights.reshape({lights.size(0), kLightRows, kLightCols, kLightChannels}).permute({0, 3, 1, 2});
}

}  // namespace relight
