#pragma once

#include <vector>

namespace relight {

// Warp direction of a displacement field. A forward field realizes the
// operator that carries an image from time t to t+1; under backward sampling
// it lives on the t+1 grid and points into frame t.
enum class FlowDirection { kForward, kBackward };

// H x W x 2 pixel displacements (x then y), row-major.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> vectors;
  FlowDirection direction = FlowDirection::kForward;

  FlowField() = default;
  FlowField(int h, int w, FlowDirection dir = FlowDirection::kForward)
      : height(h), width(w), vectors(static_cast<std::size_t>(h) * w * 2, 0.0f), direction(dir) {}

  float& dx(int y, int x) { return vectors[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float& dy(int y, int x) { return vectors[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
  float dx(int y, int x) const { return vectors[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float dy(int y, int x) const { return vectors[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }

  bool operator==(const FlowField&) const = default;
};

}  // namespace relight
