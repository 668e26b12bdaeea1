#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relight/vec3.hpp"

namespace relight {

using Rng = std::mt19937_64;

inline constexpr int kLightRows = 16;
inline constexpr int kLightCols = 16;
inline constexpr int kLightChannels = 3;
inline constexpr int kLightSize = kLightRows * kLightCols * kLightChannels;  // 768

// Latitude-longitude environment lighting, 16 x 16 x RGB, row-major
// (row = latitude, col = longitude, channel). Row r spans
// theta in [pi r / 16, pi (r+1) / 16], col c spans phi in [2 pi c / 16, 2 pi (c+1) / 16].
class LightMap {
 public:
  LightMap() { values_.fill(0.0f); }

  // Validating constructor; throws ShapeError on length != 768 and
  // InvariantError on negative or non-finite entries.
  static LightMap from_values(std::span<const float> values);
  static LightMap constant(float value);

  float& at(int row, int col, int channel) { return values_[offset(row, col, channel)]; }
  float at(int row, int col, int channel) const { return values_[offset(row, col, channel)]; }

  std::span<const float, kLightSize> values() const { return values_; }
  std::span<float, kLightSize> values() { return values_; }

  // Throws InvariantError if any entry is negative or non-finite.
  void validate() const;
  float max_value() const;

  LightMap& operator+=(const LightMap& o);
  friend LightMap operator+(LightMap a, const LightMap& b) { return a += b; }
  friend LightMap operator*(float s, LightMap a) {
    for (float& v : a.values_) v *= s;
    return a;
  }
  bool operator==(const LightMap&) const = default;

  static constexpr int offset(int row, int col, int channel) {
    return (row * kLightCols + col) * kLightChannels + channel;
  }

 private:
  std::array<float, kLightSize> values_;
};

// Unit direction of the texel centre: theta = pi (r + 0.5) / 16,
// phi = 2 pi (c + 0.5) / 16, omega = (sin t cos p, sin t sin p, cos t).
Vec3 texel_direction(int row, int col);

// Bilinear radiance lookup at a direction. Longitude wraps, latitude clamps
// at the poles.
std::array<float, 3> sample_direction(const LightMap& map, const Vec3& direction);

// Cyclic longitude shift: out(r, (c + columns) mod 16) = in(r, c).
LightMap rotate_light(const LightMap& map, int columns);

// Draw one library map uniformly, then one of the 16 rotations uniformly.
LightMap sample_uniform_light(Rng& rng, std::span<const LightMap> library);

struct PointLight {
  Vec3 direction;               // unit, from the sphere centre
  float surface_distance = 1.0f;  // (0, 1.5]
  std::array<float, 3> color{1.0f, 1.0f, 1.0f};

  void validate() const;
};

inline constexpr float kMaxSurfaceDistance = 1.5f;

// Each texel accumulates color * max(0, omega . direction) / (1 + distance)^2.
LightMap project_point_lights(std::span<const PointLight> lights);

// One to three lights with uniform direction on the sphere, distance in
// (0, 1.5] and colour in [0, 1]^3.
std::vector<PointLight> sample_point_lights(Rng& rng);
LightMap sample_point_light_map(Rng& rng);

// Beta(1/2, 1/2) draw through the arcsine inverse CDF.
double sample_beta_half(Rng& rng);

struct LightTriplet {
  LightMap L_i;
  LightMap L_j;
  LightMap L_k;
  double beta1 = 0.0;
  double beta2 = 0.0;
};

// Forcing hooks for tests and tooling. Random draws are consumed regardless,
// so overriding one value does not shift the rest of the stream.
struct TripletOverrides {
  std::optional<double> beta1;
  std::optional<double> beta2;
  bool drop_point_lights = false;
};

// L_i = X_i; L_j = b1 L_i + (1 - b1) X_j; L_k = b2 L_j + (1 - b2) X_k + Y.
LightTriplet sample_triplet(Rng& rng, std::span<const LightMap> library,
                            const TripletOverrides& overrides = {});

// 1/2 * sum (log(1 + a) - log(1 + b))^2 over all 768 entries.
double log_light_distance(const LightMap& a, const LightMap& b);

// Spherical interpolation of two maps treated as 768-vectors. The direction
// is slerped and the norm interpolated linearly, so non-negative inputs give
// non-negative outputs.
LightMap slerp_light(const LightMap& a, const LightMap& b, double t);

struct NamedLight {
  std::string name;
  LightMap map;
};

// Procedural environment presets used as the sampling library.
std::vector<NamedLight> preset_library();
std::vector<LightMap> preset_maps();

// <path> holds 768 little-endian floats; <path with .json extension> is the
// sidecar {"kind":"lightmap","shape":[16,16,3]}.
void write_light_map(const LightMap& map, const std::filesystem::path& path);
LightMap read_light_map(const std::filesystem::path& path);

}  // namespace relight
