#include "relight/olat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relight/errors.hpp"

namespace relight {
namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Row-major 3x3 rotation.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.m[i * 3 + j] = m[i * 3] * o.m[j] + m[i * 3 + 1] * o.m[3 + j] + m[i * 3 + 2] * o.m[6 + j];
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
    return r;
  }
};

Mat3 rotation_of(const RigidPose& pose) {
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
  const Mat3 yaw{{cy, -sy, 0, sy, cy, 0, 0, 0, 1}};
  const Mat3 pitch{{cp, 0, sp, 0, 1, 0, -sp, 0, cp}};
  return yaw * pitch;
}

// Image-plane mapping. World +y is image right, +z is up; the frame spans
// [-1, 1] horizontally.
struct Camera {
  int height;
  int width;
  double scale;  // pixels per world unit

  Camera(int h, int w) : height(h), width(w), scale(w / 2.0) {}

  double world_y(double px) const { return (px + 0.5 - width / 2.0) / scale; }
  double world_z(double py) const { return (height / 2.0 - py - 0.5) / scale; }
  double pixel_x(const Vec3& p) const { return p.y * scale + width / 2.0 - 0.5; }
  double pixel_y(const Vec3& p) const { return height / 2.0 - p.z * scale - 0.5; }
  Vec3 translation(const RigidPose& pose) const { return {0.0, pose.tx / scale, -pose.ty / scale}; }
};

struct SurfaceSample {
  bool hit = false;
  Vec3 local;   // hit point in head coordinates
  Vec3 normal;  // world normal
  int region = kBackground;
  std::array<double, 3> albedo{};
  double specular_strength = 0.0;
  double specular_exponent = 1.0;
};

double blob(const Vec3& p, const Vec3& centre, double radius) {
  const Vec3 d = p - centre;
  return std::exp(-dot(d, d) / (radius * radius));
}

struct Shader {
  const SceneSpec& spec;
  double skin_phase_a;
  double skin_phase_b;

  SurfaceSample shade(const Vec3& local, const Mat3& rotation) const {
    const auto& r = spec.head.radii;
    SurfaceSample s;
    s.hit = true;
    s.local = local;
    s.normal = rotation * normalize({local.x / (r[0] * r[0]), local.y / (r[1] * r[1]), local.z / (r[2] * r[2])});
    const Vec3 q{local.x / r[0], local.y / r[1], local.z / r[2]};
    const bool hair = q.z > spec.head.hair_line || (q.x < spec.head.hair_back && q.z > -0.25);
    const RegionMaterial& mat = hair ? spec.hair : spec.skin;
    s.region = hair ? kHair : kSkin;
    s.specular_strength = mat.specular_strength;
    s.specular_exponent = mat.specular_exponent;

    double modulation;
    if (hair) {
      modulation = 1.0 + mat.texture_amplitude * std::sin(mat.texture_frequency * (q.y + 0.3 * q.z));
    } else {
      modulation = 1.0 + mat.texture_amplitude * std::sin(mat.texture_frequency * q.y + skin_phase_a) *
                             std::sin(mat.texture_frequency * q.z + skin_phase_b);
    }
    for (int c = 0; c < 3; ++c) s.albedo[c] = mat.albedo[c] * modulation;
    if (!hair) {
      // Eyes, brows and mouth give the face a fixed structure.
      const double eyes = blob(q, {0.8, 0.36, 0.12}, 0.13) + blob(q, {0.8, -0.36, 0.12}, 0.13);
      const double brows = blob(q, {0.75, 0.36, 0.3}, 0.09) + blob(q, {0.75, -0.36, 0.3}, 0.09);
      const double mouth = blob(q, {0.85, 0.0, -0.42}, 0.14);
      const double dark = std::clamp(0.85 * eyes + 0.6 * brows, 0.0, 0.9);
      for (int c = 0; c < 3; ++c) s.albedo[c] *= 1.0 - dark;
      s.albedo[0] *= 1.0 + 0.35 * mouth;
      s.albedo[1] *= 1.0 - 0.35 * mouth;
      s.albedo[2] *= 1.0 - 0.25 * mouth;
    }
    for (auto& a : s.albedo) a = std::clamp(a, 0.0, 1.0);
    return s;
  }
};

// Nearest intersection of the camera ray through (wy, wz) with the posed head.
std::optional<Vec3> intersect(const SceneSpec& spec, const Mat3& rotation, const Vec3& translation, double wy,
                              double wz) {
  const auto& r = spec.head.radii;
  const Mat3 inverse = rotation.transposed();
  const Vec3 o = inverse * (Vec3{10.0, wy, wz} - translation);
  const Vec3 d = inverse * Vec3{-1.0, 0.0, 0.0};
  const double a = d.x * d.x / (r[0] * r[0]) + d.y * d.y / (r[1] * r[1]) + d.z * d.z / (r[2] * r[2]);
  const double b = 2.0 * (o.x * d.x / (r[0] * r[0]) + o.y * d.y / (r[1] * r[1]) + o.z * d.z / (r[2] * r[2]));
  const double c = o.x * o.x / (r[0] * r[0]) + o.y * o.y / (r[1] * r[1]) + o.z * o.z / (r[2] * r[2]) - 1.0;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  return o + d * t;
}

}  // namespace

void OlatSequence::validate() const {
  if (frames.empty()) throw ShapeError("sequence has no frames");
  const auto& first = frames.front();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.num_lights != num_lights() || f.height != first.height || f.width != first.width) {
      throw ShapeError("frame " + std::to_string(i) + " shape differs from frame 0");
    }
    if (f.basis.size() != static_cast<std::size_t>(f.num_lights) * f.height * f.width * 3) {
      throw ShapeError("frame " + std::to_string(i) + " basis has wrong length");
    }
    const bool last = i + 1 == frames.size();
    if (f.flow_to_next.has_value() == last) throw ShapeError("frame " + std::to_string(i) + " flow_to_next presence");
    if (f.flow_to_prev.has_value() == (i == 0)) throw ShapeError("frame " + std::to_string(i) + " flow_to_prev presence");
  }
}

void SceneSpec::validate() const {
  for (double r : head.radii) {
    if (!(r > 0.0)) throw ConfigError("head radii must be positive");
  }
  if (num_lights < 4) throw ConfigError("scene needs at least 4 lights");
  if (!light_directions.empty() && static_cast<int>(light_directions.size()) != num_lights) {
    throw ConfigError("light_directions length must equal num_lights");
  }
  if (!is_power_of_two(height) || !is_power_of_two(width) || height < 32 || width < 32) {
    throw ConfigError("render size must be powers of two >= 32");
  }
  if (motion.empty()) throw ConfigError("motion script is empty");
}

std::vector<Vec3> fibonacci_sphere(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(count);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.push_back({s * std::cos(phi), s * std::sin(phi), z});
  }
  return dirs;
}

SceneSpec make_scene(int identity, int take, int frames, std::uint64_t seed, int height, int width,
                     int num_lights) {
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.num_lights = num_lights;
  spec.seed = seed;
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "id%02d", identity);
  spec.identity_id = buffer;
  std::snprintf(buffer, sizeof(buffer), "take%02d", take);
  spec.take_id = buffer;

  Rng identity_rng(seed * 1000003ULL + static_cast<std::uint64_t>(identity) * 7919ULL + 17ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  static constexpr std::array<std::array<float, 3>, 5> kSkinTones{{
      {0.78f, 0.58f, 0.48f}, {0.66f, 0.46f, 0.36f}, {0.52f, 0.36f, 0.27f}, {0.38f, 0.25f, 0.18f}, {0.85f, 0.66f, 0.56f}}};
  static constexpr std::array<std::array<float, 3>, 4> kHairTones{{
      {0.12f, 0.08f, 0.05f}, {0.35f, 0.22f, 0.12f}, {0.55f, 0.45f, 0.30f}, {0.05f, 0.05f, 0.06f}}};
  spec.head.radii = {0.55 + 0.06 * u(identity_rng), 0.46 + 0.08 * u(identity_rng), 0.68 + 0.08 * u(identity_rng)};
  spec.head.hair_line = 0.25 + 0.2 * u(identity_rng);
  spec.skin.albedo = kSkinTones[static_cast<std::size_t>(u(identity_rng) * kSkinTones.size()) % kSkinTones.size()];
  spec.skin.texture_frequency = static_cast<float>(6.0 + 6.0 * u(identity_rng));
  spec.skin.specular_exponent = static_cast<float>(8.0 + 10.0 * u(identity_rng));
  spec.hair.albedo = kHairTones[static_cast<std::size_t>(u(identity_rng) * kHairTones.size()) % kHairTones.size()];

  Rng motion_rng(seed * 1000003ULL + static_cast<std::uint64_t>(identity) * 7919ULL +
                 static_cast<std::uint64_t>(take) * 104729ULL + 29ULL);
  const double yaw_amp = 0.15 + 0.2 * u(motion_rng);
  const double yaw_rate = 0.15 + 0.15 * u(motion_rng);
  const double yaw_phase = 2.0 * kPi * u(motion_rng);
  const double pitch_amp = 0.05 + 0.1 * u(motion_rng);
  const double pitch_phase = 2.0 * kPi * u(motion_rng);
  const double tx_amp = 1.0 + 2.0 * u(motion_rng);
  const double ty_amp = 0.5 + 1.5 * u(motion_rng);
  const double t_phase = 2.0 * kPi * u(motion_rng);
  for (int f = 0; f < frames; ++f) {
    RigidPose pose;
    pose.yaw = yaw_amp * std::sin(yaw_rate * f + yaw_phase);
    pose.pitch = pitch_amp * std::sin(0.7 * yaw_rate * f + pitch_phase);
    pose.tx = tx_amp * std::sin(0.2 * f + t_phase);
    pose.ty = ty_amp * std::cos(0.17 * f + t_phase);
    spec.motion.push_back(pose);
  }
  return spec;
}

OlatSequence render_sequence(const SceneSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width, n = spec.num_lights;
  const int frame_count = static_cast<int>(spec.motion.size());
  const Camera camera(h, w);

  Rng texture_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  const Shader shader{spec, u(texture_rng), u(texture_rng)};

  OlatSequence seq;
  seq.light_directions = spec.light_directions.empty() ? fibonacci_sphere(n) : spec.light_directions;
  for (auto& d : seq.light_directions) d = normalize(d);
  seq.fps = spec.fps;
  seq.identity_id = spec.identity_id;
  seq.take_id = spec.take_id;
  seq.seed = spec.seed;

  std::vector<Mat3> rotations;
  std::vector<Vec3> translations;
  for (const auto& pose : spec.motion) {
    rotations.push_back(rotation_of(pose));
    translations.push_back(camera.translation(pose));
  }

  const Vec3 view{1.0, 0.0, 0.0};
  std::vector<Vec3> halfway;
  for (const auto& d : seq.light_directions) halfway.push_back(normalize(d + view));

  for (int f = 0; f < frame_count; ++f) {
    OlatFrame frame;
    frame.num_lights = n;
    frame.height = h;
    frame.width = w;
    frame.basis.assign(static_cast<std::size_t>(n) * h * w * 3, 0.0f);
    frame.parsing = Image(h, w, kSemanticClasses);
    frame.foreground = Image(h, w, 1);
    if (f + 1 < frame_count) frame.flow_to_next = FlowField(h, w, FlowDirection::kBackward);
    if (f > 0) frame.flow_to_prev = FlowField(h, w, FlowDirection::kForward);

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto local = intersect(spec, rotations[f], translations[f], camera.world_y(x), camera.world_z(y));
        if (!local) {
          frame.parsing.at(y, x, kBackground) = 1.0f;
          continue;
        }
        const SurfaceSample s = shader.shade(*local, rotations[f]);
        frame.parsing.at(y, x, s.region) = 1.0f;
        frame.foreground.at(y, x) = 1.0f;
        for (int l = 0; l < n; ++l) {
          const double cosine = dot(s.normal, seq.light_directions[l]);
          if (cosine <= 0.0) continue;
          const double spec_term = s.specular_strength * std::pow(std::max(0.0, dot(s.normal, halfway[l])), s.specular_exponent);
          const std::size_t base = ((static_cast<std::size_t>(l) * h + y) * w + x) * 3;
          for (int c = 0; c < 3; ++c) frame.basis[base + c] = static_cast<float>(s.albedo[c] * cosine + spec_term);
        }
        // Analytic flow: re-pose the same surface point in the neighbouring frames.
        const double px = x, py = y;
        auto displacement = [&](int other, FlowField& field) {
          const Vec3 p = rotations[other] * *local + translations[other];
          field.dx(y, x) = static_cast<float>(camera.pixel_x(p) - px);
          field.dy(y, x) = static_cast<float>(camera.pixel_y(p) - py);
        };
        if (frame.flow_to_next) displacement(f + 1, *frame.flow_to_next);
        if (frame.flow_to_prev) displacement(f - 1, *frame.flow_to_prev);
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<std::array<float, 3>> light_weights(std::span<const Vec3> lights, const LightMap& map) {
  const double solid_angle = 4.0 * kPi / static_cast<double>(lights.size());
  std::vector<std::array<float, 3>> weights;
  weights.reserve(lights.size());
  for (const auto& d : lights) {
    const auto radiance = sample_direction(map, d);
    weights.push_back({static_cast<float>(radiance[0] * solid_angle), static_cast<float>(radiance[1] * solid_angle),
                       static_cast<float>(radiance[2] * solid_angle)});
  }
  return weights;
}

Image composite_linear(const OlatFrame& frame, std::span<const Vec3> lights, const LightMap& map) {
  if (static_cast<int>(lights.size()) != frame.num_lights) {
    throw ShapeError("composite: frame has " + std::to_string(frame.num_lights) + " lights, got " +
                     std::to_string(lights.size()) + " directions");
  }
  map.validate();
  const auto weights = light_weights(lights, map);
  Image out(frame.height, frame.width, 3);
  const std::size_t pixels = out.pixel_count();
  for (int l = 0; l < frame.num_lights; ++l) {
    const auto basis = frame.basis_image(l);
    const auto& w = weights[l];
    if (w[0] == 0.0f && w[1] == 0.0f && w[2] == 0.0f) continue;
    for (std::size_t p = 0; p < pixels; ++p) {
      out.data[p * 3 + 0] += w[0] * basis[p * 3 + 0];
      out.data[p * 3 + 1] += w[1] * basis[p * 3 + 1];
      out.data[p * 3 + 2] += w[2] * basis[p * 3 + 2];
    }
  }
  return out;
}

Image composite_relit(const OlatFrame& frame, std::span<const Vec3> lights, const LightMap& map, float exposure) {
  return tone_map(composite_linear(frame, lights, map), exposure);
}

}  // namespace relight
