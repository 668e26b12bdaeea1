#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relight/flow_field.hpp"
#include "relight/image.hpp"
#include "relight/lighting.hpp"
#include "relight/vec3.hpp"

namespace relight {

inline constexpr int kSemanticClasses = 3;
enum SemanticClass : int { kSkin = 0, kHair = 1, kBackground = 2 };

// One OLAT image set: per-light HDR basis images plus ground truth.
struct OlatFrame {
  int num_lights = 0;
  int height = 0;
  int width = 0;
  std::vector<float> basis;  // num_lights x H x W x 3
  Image parsing;             // H x W x 3 (skin, hair, background)
  Image foreground;          // H x W x 1, values in {0, 1}
  // Motion displacement of each visible surface point to the next frame
  // (absent on the last frame) and to the previous frame (absent on the first).
  std::optional<FlowField> flow_to_next;
  std::optional<FlowField> flow_to_prev;

  std::span<const float> basis_image(int light) const {
    const std::size_t n = static_cast<std::size_t>(height) * width * 3;
    return std::span<const float>(basis).subspan(n * light, n);
  }

  bool operator==(const OlatFrame&) const = default;
};

struct OlatSequence {
  std::vector<OlatFrame> frames;
  std::vector<Vec3> light_directions;
  double fps = 25.0;
  std::string identity_id;
  std::string take_id;
  std::uint64_t seed = 0;

  int num_lights() const { return static_cast<int>(light_directions.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int width() const { return frames.empty() ? 0 : frames.front().width; }

  // Throws ShapeError on inconsistent frame shapes or missing flows.
  void validate() const;
};

struct RegionMaterial {
  std::array<float, 3> albedo{0.6f, 0.45f, 0.38f};
  float texture_amplitude = 0.1f;
  float texture_frequency = 9.0f;
  float specular_strength = 0.08f;
  float specular_exponent = 12.0f;
};

// Ellipsoidal head proxy in its local frame (+x faces the camera, +z up).
struct HeadGeometry {
  std::array<double, 3> radii{0.58, 0.50, 0.72};
  double hair_line = 0.35;   // normalized height above which the surface is hair
  double hair_back = -0.15;  // normalized depth behind which the upper surface is hair
};

// Rigid pose of the head for one frame. Rotation is applied in local
// coordinates before translating; translation is in pixels (x right, y down).
struct RigidPose {
  double yaw = 0.0;    // radians about the vertical axis
  double pitch = 0.0;  // radians about the image-horizontal axis
  double tx = 0.0;
  double ty = 0.0;
};

struct SceneSpec {
  HeadGeometry head;
  RegionMaterial skin;
  RegionMaterial hair{{0.16f, 0.10f, 0.07f}, 0.25f, 30.0f, 0.2f, 40.0f};
  std::vector<RigidPose> motion;  // one pose per frame
  int height = 64;
  int width = 64;
  int num_lights = 16;
  // Explicit light directions; empty means a Fibonacci sphere of num_lights.
  std::vector<Vec3> light_directions;
  std::uint64_t seed = 0;
  std::string identity_id = "id00";
  std::string take_id = "take00";
  double fps = 25.0;

  // Throws ConfigError on non-positive radii, fewer than 4 lights, or image
  // sizes that are not powers of two >= 32.
  void validate() const;
};

// Equal-area light directions on the unit sphere.
std::vector<Vec3> fibonacci_sphere(int count);

// Procedural identity (albedo, geometry) and a smooth random motion script.
SceneSpec make_scene(int identity, int take, int frames, std::uint64_t seed, int height = 64,
                     int width = 64, int num_lights = 16);

OlatSequence render_sequence(const SceneSpec& spec);

// Per-light RGB weights L(dir_l) * 4 pi / N.
std::vector<std::array<float, 3>> light_weights(std::span<const Vec3> lights, const LightMap& map);

// Pre-tonemap sum_l w_l * basis_l. Linear in the light map.
Image composite_linear(const OlatFrame& frame, std::span<const Vec3> lights, const LightMap& map);

// composite_linear followed by a fixed exposure and clamp to [0, 1].
Image composite_relit(const OlatFrame& frame, std::span<const Vec3> lights, const LightMap& map,
                      float exposure = 1.0f);

}  // namespace relight
