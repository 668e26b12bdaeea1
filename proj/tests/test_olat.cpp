#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "relight/errors.hpp"
#include "relight/olat.hpp"

using namespace relight;

namespace {

SceneSpec small_scene(int frames = 3) {
  SceneSpec spec = make_scene(0, 0, frames, 5, 32, 32, 16);
  return spec;
}

std::pair<int, int> containing_texel(const Vec3& d) {
  const double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
  double phi = std::atan2(d.y, d.x);
  if (phi < 0) phi += 2.0 * std::numbers::pi;
  return {std::min(static_cast<int>(theta / std::numbers::pi * 16), 15),
          static_cast<int>(phi / (2.0 * std::numbers::pi) * 16) % 16};
}

LightMap random_map(Rng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  LightMap m;
  for (float& v : m.values()) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("scene validation") {
  SceneSpec spec = small_scene();
  CHECK_NOTHROW(spec.validate());
  spec.head.radii[1] = 0.0;
  CHECK_THROWS_AS(render_sequence(spec), ConfigError);
  spec = small_scene();
  spec.num_lights = 3;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_scene();
  spec.width = 48;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_scene();
  spec.height = 16;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("fibonacci directions are unit and spread") {
  const auto dirs = fibonacci_sphere(16);
  REQUIRE(dirs.size() == 16);
  Vec3 mean;
  for (const auto& d : dirs) {
    CHECK(norm(d) == doctest::Approx(1.0));
    mean = mean + d * (1.0 / 16);
  }
  CHECK(norm(mean) < 0.1);
}

TEST_CASE("rendered frames satisfy the OLAT frame invariants") {
  const OlatSequence seq = render_sequence(small_scene(4));
  CHECK_NOTHROW(seq.validate());
  CHECK(seq.frames.size() == 4);
  CHECK(seq.fps == 25.0);
  std::size_t fg = 0;
  for (const auto& f : seq.frames) {
    for (float v : f.basis) CHECK_FALSE(v < 0.0f);
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) {
        float sum = 0.0f;
        for (int c = 0; c < kSemanticClasses; ++c) sum += f.parsing.at(y, x, c);
        CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
        const float expected = f.parsing.at(y, x, kBackground) < 0.5f ? 1.0f : 0.0f;
        CHECK(f.foreground.at(y, x) == expected);
        fg += f.foreground.at(y, x) > 0.5f;
      }
  }
  CHECK(fg > 0);
  CHECK_FALSE(seq.frames.front().flow_to_prev.has_value());
  CHECK_FALSE(seq.frames.back().flow_to_next.has_value());
}

TEST_CASE("both semantic foreground classes appear") {
  const OlatSequence seq = render_sequence(make_scene(1, 0, 1, 3));
  int skin = 0, hair = 0;
  const auto& p = seq.frames[0].parsing;
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      skin += p.at(y, x, kSkin) > 0.5f;
      hair += p.at(y, x, kHair) > 0.5f;
    }
  CHECK(skin > 100);
  CHECK(hair > 50);
}

TEST_CASE("rendering is deterministic") {
  const SceneSpec spec = small_scene(3);
  CHECK(render_sequence(spec).frames == render_sequence(spec).frames);
}

TEST_CASE("static motion gives zero flow") {
  SceneSpec spec = small_scene(3);
  for (auto& pose : spec.motion) pose = spec.motion.front();
  const OlatSequence seq = render_sequence(spec);
  for (const auto& f : seq.frames) {
    if (f.flow_to_next)
      for (float v : f.flow_to_next->vectors) CHECK(std::abs(v) < 1e-5f);
    if (f.flow_to_prev)
      for (float v : f.flow_to_prev->vectors) CHECK(std::abs(v) < 1e-5f);
  }
}

TEST_CASE("pure x-translation of one pixel per frame") {
  SceneSpec spec = small_scene(3);
  for (int f = 0; f < 3; ++f) spec.motion[f] = RigidPose{0.1, 0.05, 2.0 + f, -1.0};
  const OlatSequence seq = render_sequence(spec);
  for (int f = 0; f < 3; ++f) {
    const auto& frame = seq.frames[f];
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) {
        if (frame.foreground.at(y, x) < 0.5f) continue;
        if (frame.flow_to_next) {
          CHECK(frame.flow_to_next->dx(y, x) == doctest::Approx(1.0f).epsilon(1e-5));
          CHECK(frame.flow_to_next->dy(y, x) == doctest::Approx(0.0f).scale(1e-5));
        }
        if (frame.flow_to_prev) CHECK(frame.flow_to_prev->dx(y, x) == doctest::Approx(-1.0f).epsilon(1e-5));
      }
  }
}

TEST_CASE("a light behind the head leaves the visible diffuse term at zero") {
  SceneSpec spec = small_scene(1);
  spec.num_lights = 4;
  spec.light_directions = {{-1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  const OlatSequence seq = render_sequence(spec);
  for (float v : seq.frames[0].basis_image(0)) CHECK(v == 0.0f);
  float lit = 0.0f;
  for (float v : seq.frames[0].basis_image(1)) lit += v;
  CHECK(lit > 0.0f);
}

TEST_CASE("composite_relit") {
  const OlatSequence seq = render_sequence(small_scene(1));
  const OlatFrame& frame = seq.frames[0];
  const auto& lights = seq.light_directions;

  SUBCASE("zero lighting") {
    const Image out = composite_relit(frame, lights, LightMap{});
    for (float v : out.data) CHECK(v == 0.0f);
  }

  SUBCASE("delta texel selects one basis image") {
    for (int l = 0; l < frame.num_lights; ++l) {
      const auto [r, c] = containing_texel(lights[l]);
      LightMap delta;
      for (int ch = 0; ch < 3; ++ch) delta.at(r, c, ch) = 1.0f;
      const Image out = composite_linear(frame, lights, delta);
      const auto w = light_weights(lights, delta);
      const auto basis = frame.basis_image(l);
      REQUIRE(w[l][0] > 0.0f);
      for (int k = 0; k < frame.num_lights; ++k)
        if (k != l) CHECK(w[k][0] == 0.0f);
      for (std::size_t i = 0; i < out.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(w[l][i % 3] * basis[i]));
    }
  }

  SUBCASE("additivity against a brute-force sum") {
    Rng rng(4);
    const LightMap a = random_map(rng), b = random_map(rng);
    const Image ca = composite_linear(frame, lights, a);
    const Image cb = composite_linear(frame, lights, b);
    const Image cab = composite_linear(frame, lights, a + b);
    for (std::size_t i = 0; i < cab.data.size(); ++i)
      CHECK(cab.data[i] == doctest::Approx(ca.data[i] + cb.data[i]).epsilon(1e-5).scale(1e-6));
  }

  SUBCASE("tone mapping clamps to the unit range") {
    const Image out = composite_relit(frame, lights, LightMap::constant(5.0f));
    for (float v : out.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  SUBCASE("mismatched light count") {
    std::vector<Vec3> fewer(lights.begin(), lights.end() - 1);
    CHECK_THROWS_AS(composite_relit(frame, fewer, LightMap{}), ShapeError);
  }
}
