#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/image.hpp"
#include "relight/lighting.hpp"
#include "relight/metrics.hpp"
#include "relight/olat.hpp"

namespace relight {

// What a relighting method sees for one evaluation pair. frame and
// light_directions describe the ground truth and are only meant for oracles.
struct RelightQuery {
  const Image& input;
  const LightMap& target;
  const OlatFrame* frame = nullptr;
  std::span<const Vec3> light_directions;
  float exposure = 1.0f;
};

using RelightFn = std::function<Image(const RelightQuery&)>;

// Predictions := ground truth (composites the frame under the target light).
RelightFn oracle_relighter();

struct FrameMetrics {
  std::string identity;
  std::string take;
  int frame = 0;
  double rmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct JitterPoint {
  int speedup = 1;
  double jitter = 0.0;  // mean masked RMSE between adjacent outputs
};

struct EvalReport {
  static constexpr int kVersion = 1;
  double rmse = 0.0;  // mean of per-pair RMSE
  double psnr = 0.0;  // psnr_from_rmse(rmse)
  double ssim = 0.0;  // mean of per-pair SSIM
  std::vector<FrameMetrics> per_frame;
  std::vector<JitterPoint> jitter_curve;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
  // Throws FormatError on a missing field or a different schema version.
  static EvalReport from_json(const nlohmann::json& j);
  void write(const std::filesystem::path& path) const;
  // speedup,jitter rows.
  void write_jitter_csv(const std::filesystem::path& path) const;
  // rmse >= 0, ssim in [-1, 1] and psnr == psnr_from_rmse(rmse).
  bool consistent() const;
};

struct EvalConfig {
  std::uint64_t seed = 7;
  int frame_stride = 1;
  float exposure = 1.0f;
};

// One pair per evaluated frame: the input is lit by L_i and the target by L_k
// of a sampled triplet; metrics compare the prediction with the composite of
// the frame under L_k inside the foreground mask.
EvalReport evaluate(const RelightFn& relight, std::span<const OlatSequence> held_out,
                    std::span<const LightMap> library, const EvalConfig& config = {});

// A cyclic keyframe path: at(u) slerps keys[floor(u / frames_per_key)] to the
// next key.
class LightPath {
 public:
  LightPath(std::vector<LightMap> keys, double frames_per_key);
  static LightPath random(Rng& rng, std::span<const LightMap> library, int keys, double frames_per_key);
  LightMap at(double u) const;
  const std::vector<LightMap>& keys() const { return keys_; }

 private:
  std::vector<LightMap> keys_;
  double frames_per_key_;
};

// For each speedup s, composites the static frame under path.at(s * t) for
// t < n_frames, relights every frame to `target` and averages the masked RMSE
// of adjacent outputs. Throws ConfigError when n_frames < 2.
std::vector<JitterPoint> jitter_benchmark(const RelightFn& relight, const OlatFrame& frame,
                                          std::span<const Vec3> light_directions, const LightPath& path,
                                          std::span<const int> speedups, const LightMap& target, int n_frames,
                                          float exposure = 1.0f);

// Speedups 1..10.
std::vector<int> default_speedups();

}  // namespace relight
