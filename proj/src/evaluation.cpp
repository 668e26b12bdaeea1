#include "relight/evaluation.hpp"

#include <cmath>
#include <fstream>

#include "relight/binary_io.hpp"
#include "relight/errors.hpp"

namespace relight {

RelightFn oracle_relighter() {
  return [](const RelightQuery& q) {
    if (q.frame == nullptr) throw EvaluationError("oracle: query carries no ground-truth frame");
    return composite_relit(*q.frame, q.light_directions, q.target, q.exposure);
  };
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : per_frame) {
    frames.push_back({{"identity", f.identity},
                      {"take", f.take},
                      {"frame", f.frame},
                      {"rmse", f.rmse},
                      {"psnr", f.psnr},
                      {"ssim", f.ssim}});
  }
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : jitter_curve) curve.push_back({{"speedup", p.speedup}, {"jitter", p.jitter}});
  return {{"kind", "eval_report"}, {"version", kVersion}, {"rmse", rmse},          {"psnr", psnr},
          {"ssim", ssim},          {"per_frame", frames}, {"jitter_curve", curve}, {"metadata", metadata}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    if (j.at("version").get<int>() != kVersion) throw FormatError("eval report", "unsupported version");
    r.rmse = j.at("rmse").get<double>();
    r.psnr = j.at("psnr").get<double>();
    r.ssim = j.at("ssim").get<double>();
    for (const auto& f : j.at("per_frame")) {
      r.per_frame.push_back({f.at("identity"), f.at("take"), f.at("frame"), f.at("rmse"), f.at("psnr"), f.at("ssim")});
    }
    for (const auto& p : j.at("jitter_curve")) r.jitter_curve.push_back({p.at("speedup"), p.at("jitter")});
    r.metadata = j.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("eval report", e.what());
  }
  return r;
}

void EvalReport::write(const std::filesystem::path& path) const { write_json(path, to_json()); }

void EvalReport::write_jitter_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string(), "cannot open for writing");
  out << "speedup,jitter\n";
  out.precision(17);
  for (const auto& p : jitter_curve) out << p.speedup << ',' << p.jitter << '\n';
}

bool EvalReport::consistent() const {
  return rmse >= 0.0 && ssim >= -1.0 && ssim <= 1.0 && psnr == psnr_from_rmse(rmse);
}

EvalReport evaluate(const RelightFn& relight, std::span<const OlatSequence> held_out,
                    std::span<const LightMap> library, const EvalConfig& config) {
  if (config.frame_stride <= 0) throw ConfigError("evaluate: frame_stride must be positive");
  Rng rng(config.seed);
  EvalReport report;
  double rmse_sum = 0.0, ssim_sum = 0.0;
  for (const auto& seq : held_out) {
    for (std::size_t t = 0; t < seq.frames.size(); t += static_cast<std::size_t>(config.frame_stride)) {
      const auto& frame = seq.frames[t];
      const auto lights = sample_triplet(rng, library);
      const auto input = composite_relit(frame, seq.light_directions, lights.L_i, config.exposure);
      const auto gt = composite_relit(frame, seq.light_directions, lights.L_k, config.exposure);
      const auto pred = relight(RelightQuery{input, lights.L_k, &frame, seq.light_directions, config.exposure});
      const auto m = masked_metrics(pred, gt, frame.foreground);
      report.per_frame.push_back({seq.identity_id, seq.take_id, static_cast<int>(t), m.rmse, m.psnr, m.ssim});
      rmse_sum += m.rmse;
      ssim_sum += m.ssim;
    }
  }
  if (report.per_frame.empty()) throw EvaluationError("evaluate: no frames in the held-out set");
  const double n = static_cast<double>(report.per_frame.size());
  report.rmse = rmse_sum / n;
  report.psnr = psnr_from_rmse(report.rmse);
  report.ssim = ssim_sum / n;
  report.metadata = {{"mask_policy", "foreground; ssim on the mask bounding box with background zeroed"},
                     {"seed", config.seed},
                     {"frame_stride", config.frame_stride},
                     {"pairs", report.per_frame.size()},
                     {"full_scale_reference", {{"rmse", 0.0349}, {"psnr", 30.6110}, {"ssim", 0.9584}}}};
  return report;
}

LightPath::LightPath(std::vector<LightMap> keys, double frames_per_key)
    : keys_(std::move(keys)), frames_per_key_(frames_per_key) {
  if (keys_.empty()) throw ConfigError("light path: no keyframes");
  if (!(frames_per_key_ > 0.0)) throw ConfigError("light path: frames_per_key must be > 0");
}

LightPath LightPath::random(Rng& rng, std::span<const LightMap> library, int keys, double frames_per_key) {
  if (keys <= 0) throw ConfigError("light path: keys must be positive");
  std::vector<LightMap> maps;
  for (int k = 0; k < keys; ++k) maps.push_back(sample_uniform_light(rng, library));
  return LightPath(std::move(maps), frames_per_key);
}

LightMap LightPath::at(double u) const {
  const double pos = u / frames_per_key_;
  const double base = std::floor(pos);
  const auto n = static_cast<long long>(keys_.size());
  const auto i = ((static_cast<long long>(base) % n) + n) % n;
  return slerp_light(keys_[static_cast<std::size_t>(i)], keys_[static_cast<std::size_t>((i + 1) % n)], pos - base);
}

std::vector<JitterPoint> jitter_benchmark(const RelightFn& relight, const OlatFrame& frame,
                                          std::span<const Vec3> light_directions, const LightPath& path,
                                          std::span<const int> speedups, const LightMap& target, int n_frames,
                                          float exposure) {
  if (n_frames < 2) throw ConfigError("jitter: need at least 2 frames");
  std::vector<JitterPoint> curve;
  for (int s : speedups) {
    double sum = 0.0;
    Image prev;
    for (int t = 0; t < n_frames; ++t) {
      const auto light = path.at(static_cast<double>(s) * t);
      const auto input = composite_relit(frame, light_directions, light, exposure);
      auto out = relight(RelightQuery{input, target, &frame, light_directions, exposure});
      if (t > 0) sum += masked_rmse(out, prev, frame.foreground);
      prev = std::move(out);
    }
    curve.push_back({s, sum / (n_frames - 1)});
  }
  return curve;
}

std::vector<int> default_speedups() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

}  // namespace relight
