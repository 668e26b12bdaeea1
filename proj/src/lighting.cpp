#include "relight/lighting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relight/binary_io.hpp"
#include "relight/errors.hpp"

namespace relight {
namespace {

constexpr double kPi = std::numbers::pi;

int wrap_column(int c) { return ((c % kLightCols) + kLightCols) % kLightCols; }

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar.replace_extension(".json");
  return sidecar;
}

}  // namespace

LightMap LightMap::from_values(std::span<const float> values) {
  if (values.size() != kLightSize) {
    throw ShapeError("light map needs " + std::to_string(kLightSize) + " values, got " +
                     std::to_string(values.size()));
  }
  LightMap map;
  std::copy(values.begin(), values.end(), map.values_.begin());
  map.validate();
  return map;
}

LightMap LightMap::constant(float value) {
  LightMap map;
  map.values_.fill(value);
  map.validate();
  return map;
}

void LightMap::validate() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0f) {
      throw InvariantError("light map entry " + std::to_string(i) + " is " +
                           std::to_string(values_[i]) + "; entries must be finite and >= 0");
    }
  }
}

float LightMap::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

LightMap& LightMap::operator+=(const LightMap& o) {
  for (int i = 0; i < kLightSize; ++i) values_[i] += o.values_[i];
  return *this;
}

Vec3 texel_direction(int row, int col) {
  const double theta = kPi * (row + 0.5) / kLightRows;
  const double phi = 2.0 * kPi * (col + 0.5) / kLightCols;
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::array<float, 3> sample_direction(const LightMap& map, const Vec3& direction) {
  const Vec3 d = normalize(direction);
  const double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
  double phi = std::atan2(d.y, d.x);
  if (phi < 0.0) phi += 2.0 * kPi;

  const double fr = std::clamp(theta / kPi * kLightRows - 0.5, 0.0, kLightRows - 1.0);
  const double fc = phi / (2.0 * kPi) * kLightCols - 0.5;
  const int r0 = static_cast<int>(std::floor(fr));
  const int r1 = std::min(r0 + 1, kLightRows - 1);
  const double wr = fr - r0;
  const int c0 = static_cast<int>(std::floor(fc));
  const double wc = fc - c0;

  std::array<float, 3> out{};
  for (int ch = 0; ch < kLightChannels; ++ch) {
    const double top = (1.0 - wc) * map.at(r0, wrap_column(c0), ch) + wc * map.at(r0, wrap_column(c0 + 1), ch);
    const double bottom = (1.0 - wc) * map.at(r1, wrap_column(c0), ch) + wc * map.at(r1, wrap_column(c0 + 1), ch);
    out[ch] = static_cast<float>((1.0 - wr) * top + wr * bottom);
  }
  return out;
}

LightMap rotate_light(const LightMap& map, int columns) {
  LightMap out;
  const int shift = wrap_column(columns);
  for (int r = 0; r < kLightRows; ++r) {
    for (int c = 0; c < kLightCols; ++c) {
      const int dst = (c + shift) % kLightCols;
      for (int ch = 0; ch < kLightChannels; ++ch) out.at(r, dst, ch) = map.at(r, c, ch);
    }
  }
  return out;
}

LightMap sample_uniform_light(Rng& rng, std::span<const LightMap> library) {
  if (library.empty()) throw ConfigError("light library is empty");
  std::uniform_int_distribution<std::size_t> pick(0, library.size() - 1);
  std::uniform_int_distribution<int> rotation(0, kLightCols - 1);
  const std::size_t index = pick(rng);
  const int columns = rotation(rng);
  return rotate_light(library[index], columns);
}

void PointLight::validate() const {
  if (std::abs(norm(direction) - 1.0) > 1e-6) throw InvariantError("point light direction is not unit length");
  if (!(surface_distance > 0.0f && surface_distance <= kMaxSurfaceDistance)) {
    throw InvariantError("point light surface distance must lie in (0, 1.5]");
  }
  for (float c : color) {
    if (!(c >= 0.0f && c <= 1.0f)) throw InvariantError("point light colour must lie in [0, 1]");
  }
}

LightMap project_point_lights(std::span<const PointLight> lights) {
  LightMap out;
  for (const auto& light : lights) {
    const double falloff = 1.0 / ((1.0 + light.surface_distance) * (1.0 + light.surface_distance));
    for (int r = 0; r < kLightRows; ++r) {
      for (int c = 0; c < kLightCols; ++c) {
        const double cosine = std::max(0.0, dot(texel_direction(r, c), light.direction));
        if (cosine <= 0.0) continue;
        for (int ch = 0; ch < kLightChannels; ++ch) {
          out.at(r, c, ch) += static_cast<float>(light.color[ch] * cosine * falloff);
        }
      }
    }
  }
  return out;
}

std::vector<PointLight> sample_point_lights(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = count(rng);
  std::vector<PointLight> lights;
  lights.reserve(n);
  for (int i = 0; i < n; ++i) {
    PointLight light;
    const double z = 2.0 * unit(rng) - 1.0;
    const double phi = 2.0 * kPi * unit(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    light.direction = {s * std::cos(phi), s * std::sin(phi), z};
    // unit() is in [0, 1), so 1.5 * (1 - u) lands in (0, 1.5].
    light.surface_distance = static_cast<float>(kMaxSurfaceDistance * (1.0 - unit(rng)));
    for (float& c : light.color) c = static_cast<float>(unit(rng));
    lights.push_back(light);
  }
  return lights;
}

LightMap sample_point_light_map(Rng& rng) {
  const auto lights = sample_point_lights(rng);
  return project_point_lights(lights);
}

double sample_beta_half(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = std::sin(0.5 * kPi * unit(rng));
  return s * s;
}

LightTriplet sample_triplet(Rng& rng, std::span<const LightMap> library, const TripletOverrides& overrides) {
  const LightMap x_i = sample_uniform_light(rng, library);
  const LightMap x_j = sample_uniform_light(rng, library);
  const LightMap x_k = sample_uniform_light(rng, library);
  const LightMap y = sample_point_light_map(rng);
  const double b1 = overrides.beta1.value_or(sample_beta_half(rng));
  const double b2 = overrides.beta2.value_or(sample_beta_half(rng));

  LightTriplet t;
  t.beta1 = b1;
  t.beta2 = b2;
  t.L_i = x_i;
  for (int n = 0; n < kLightSize; ++n) {
    const double lj = b1 * t.L_i.values()[n] + (1.0 - b1) * x_j.values()[n];
    t.L_j.values()[n] = static_cast<float>(lj);
    double lk = b2 * lj + (1.0 - b2) * x_k.values()[n];
    if (!overrides.drop_point_lights) lk += y.values()[n];
    t.L_k.values()[n] = static_cast<float>(lk);
  }
  return t;
}

double log_light_distance(const LightMap& a, const LightMap& b) {
  a.validate();
  b.validate();
  double sum = 0.0;
  for (int n = 0; n < kLightSize; ++n) {
    const double d = std::log1p(static_cast<double>(a.values()[n])) - std::log1p(static_cast<double>(b.values()[n]));
    sum += d * d;
  }
  return 0.5 * sum;
}

LightMap slerp_light(const LightMap& a, const LightMap& b, double t) {
  if (a == b || t == 0.0) return a;
  if (t == 1.0) return b;
  double na = 0.0, nb = 0.0, ab = 0.0;
  for (int n = 0; n < kLightSize; ++n) {
    na += double(a.values()[n]) * a.values()[n];
    nb += double(b.values()[n]) * b.values()[n];
    ab += double(a.values()[n]) * b.values()[n];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  LightMap out;
  if (na == 0.0 || nb == 0.0) {
    for (int n = 0; n < kLightSize; ++n) {
      out.values()[n] = static_cast<float>((1.0 - t) * a.values()[n] + t * b.values()[n]);
    }
    return out;
  }
  const double omega = std::acos(std::clamp(ab / (na * nb), -1.0, 1.0));
  double wa = 1.0 - t, wb = t;
  if (omega > 1e-6) {
    wa = std::sin((1.0 - t) * omega) / std::sin(omega);
    wb = std::sin(t * omega) / std::sin(omega);
  }
  const double target_norm = (1.0 - t) * na + t * nb;
  // Combine unit directions, then rescale to the interpolated norm.
  double out_norm = 0.0;
  std::array<double, kLightSize> dir{};
  for (int n = 0; n < kLightSize; ++n) {
    dir[n] = wa * a.values()[n] / na + wb * b.values()[n] / nb;
    out_norm += dir[n] * dir[n];
  }
  out_norm = std::sqrt(out_norm);
  for (int n = 0; n < kLightSize; ++n) {
    out.values()[n] = static_cast<float>(std::max(0.0, dir[n] / out_norm * target_norm));
  }
  return out;
}

namespace {

struct Lobe {
  Vec3 direction;
  double sharpness;  // exponent on max(0, cos)
  std::array<double, 3> color;
};

LightMap build_map(const std::array<double, 3>& sky, const std::array<double, 3>& ground,
                   std::initializer_list<Lobe> lobes) {
  LightMap map;
  for (int r = 0; r < kLightRows; ++r) {
    for (int c = 0; c < kLightCols; ++c) {
      const Vec3 w = texel_direction(r, c);
      const double up = 0.5 * (w.z + 1.0);
      for (int ch = 0; ch < 3; ++ch) {
        double v = up * sky[ch] + (1.0 - up) * ground[ch];
        for (const auto& lobe : lobes) {
          const double cosine = std::max(0.0, dot(w, normalize(lobe.direction)));
          v += lobe.color[ch] * std::pow(cosine, lobe.sharpness);
        }
        map.at(r, c, ch) = static_cast<float>(v);
      }
    }
  }
  return map;
}

}  // namespace

std::vector<NamedLight> preset_library() {
  // Axes: +x faces the camera, +y is image right, +z is up.
  return {
      {"overcast", build_map({0.34, 0.36, 0.40}, {0.08, 0.08, 0.07}, {})},
      {"noon", build_map({0.16, 0.22, 0.34}, {0.06, 0.05, 0.04}, {{{0.3, 0.2, 1.0}, 40.0, {2.6, 2.4, 2.0}}})},
      {"sunset", build_map({0.18, 0.10, 0.16}, {0.04, 0.03, 0.03}, {{{0.6, -0.8, 0.15}, 20.0, {2.4, 1.1, 0.4}}})},
      {"studio_key", build_map({0.05, 0.05, 0.05}, {0.02, 0.02, 0.02},
                               {{{0.8, 0.6, 0.5}, 12.0, {1.8, 1.7, 1.6}}, {{0.7, -0.7, 0.0}, 4.0, {0.35, 0.35, 0.4}}})},
      {"window_left", build_map({0.06, 0.06, 0.07}, {0.03, 0.03, 0.03}, {{{0.3, -1.0, 0.2}, 6.0, {1.3, 1.35, 1.45}}})},
      {"rim", build_map({0.05, 0.05, 0.06}, {0.02, 0.02, 0.02},
                        {{{-1.0, 0.7, 0.3}, 10.0, {1.6, 1.6, 1.7}}, {{-1.0, -0.7, 0.3}, 10.0, {1.2, 1.3, 1.6}}})},
      {"neon", build_map({0.04, 0.03, 0.05}, {0.02, 0.02, 0.02},
                         {{{0.5, 1.0, 0.0}, 8.0, {1.6, 0.2, 1.3}}, {{0.5, -1.0, 0.0}, 8.0, {0.2, 1.3, 1.5}}})},
      {"dusk", build_map({0.10, 0.12, 0.24}, {0.05, 0.04, 0.03}, {{{0.2, 0.9, 0.05}, 6.0, {0.9, 0.5, 0.25}}})},
  };
}

std::vector<LightMap> preset_maps() {
  std::vector<LightMap> maps;
  for (auto& preset : preset_library()) maps.push_back(preset.map);
  return maps;
}

void write_light_map(const LightMap& map, const std::filesystem::path& path) {
  map.validate();
  write_f32(path, map.values());
  write_json(sidecar_path(path), {{"kind", "lightmap"}, {"shape", {kLightRows, kLightCols, kLightChannels}}});
}

LightMap read_light_map(const std::filesystem::path& path) {
  const auto sidecar_file = sidecar_path(path);
  const auto sidecar = read_json(sidecar_file);
  if (sidecar.value("kind", "") != "lightmap") throw FormatError(sidecar_file, "sidecar kind is not \"lightmap\"");
  if (sidecar.value("shape", nlohmann::json::array()) != nlohmann::json({kLightRows, kLightCols, kLightChannels})) {
    throw FormatError(sidecar_file, "sidecar shape must be [16,16,3]");
  }
  const auto values = read_f32(path, kLightSize);
  try {
    return LightMap::from_values(values);
  } catch (const InvariantError& e) {
    throw FormatError(path, e.what());
  }
}

}  // namespace relight
