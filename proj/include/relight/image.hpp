#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relight {

// Row-major H x W x C float image. Masks are single-channel images with
// values in {0, 1}.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool empty() const { return data.empty(); }

  bool operator==(const Image&) const = default;
};

// Throws ShapeError naming `what` when shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

// Bilinear resize with half-pixel centers (each output pixel samples the
// source at ((x + 0.5) * sx - 0.5)); edges clamp.
Image resize_bilinear(const Image& src, int height, int width);

// Nearest-neighbour resize, used for binary masks.
Image resize_nearest(const Image& src, int height, int width);

// Rectangular window [y0, y0+h) x [x0, x0+w).
Image crop(const Image& src, int y0, int x0, int h, int w);

// Clamp(exposure * x, 0, 1) elementwise.
Image tone_map(const Image& hdr, float exposure = 1.0f);

}  // namespace relight
