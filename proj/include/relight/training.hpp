#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "relight/flow_field.hpp"
#include "relight/image.hpp"
#include "relight/lighting.hpp"
#include "relight/losses.hpp"
#include "relight/model.hpp"
#include "relight/olat.hpp"

namespace relight {

struct AugmentConfig {
  bool enabled = true;
  double min_scale = 0.6;  // crop side as a fraction of the frame side
  double max_scale = 1.0;

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

struct TrainConfig {
  ModelConfig model;
  LossWeights weights;
  AugmentConfig augment;
  double learning_rate = 5e-5;
  std::string lr_schedule = "constant";  // "constant" or "cosine" (decays to lr_min_ratio * lr at steps)
  double lr_min_ratio = 0.05;
  double clip = 0.01;  // discriminator parameters are clamped to [-clip, clip]
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-8;
  int batch_size = 4;
  int steps = 5000;
  int warmup_steps = 500;  // basic + parsing only before this step
  int disc_steps = 1;      // discriminator updates per generator update
  int checkpoint_every = 1000;
  float exposure = 1.0f;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

// Two adjacent frames with a sampled lighting triplet. Frame t is shown under
// L_i and frame t+1 under L_j; every image is composite_relit of its frame.
struct TrainingTriplet {
  LightTriplet lights;
  Image input_t;      // I^i_t
  Image input_t1;     // I^j_{t+1}
  Image target_k_t;   // I^k_t
  Image target_k_t1;  // I^k_{t+1}
  Image target_j_t;   // I^j_t
  Image target_i_t1;  // I^i_{t+1}
  Image mask_t, mask_t1;
  Image parsing_t, parsing_t1;
  FlowField flow_fwd;  // realizes f_{t,t+1}: on frame t+1's grid, pointing into t
  FlowField flow_bwd;  // realizes f_{t+1,t}: on frame t's grid, pointing into t+1
};

// Throws ConfigError when t or t + 1 is out of range.
TrainingTriplet build_triplet(const OlatSequence& seq, int t, Rng& rng, std::span<const LightMap> library,
                              const TripletOverrides& overrides = {}, float exposure = 1.0f);

// Crops [y0, y0+h) x [x0, x0+w) from every image, mask, parsing map and flow
// of the triplet, then resizes to out_h x out_w (bilinear for images, parsing
// and flow; nearest for masks). Flow vectors are rescaled by the resize factor.
TrainingTriplet crop_and_resize(const TrainingTriplet& triplet, int y0, int x0, int h, int w, int out_h, int out_w);

// One random window (side scale uniform in the configured range, uniform
// position) shared by both frames, resized to out_h x out_w.
TrainingTriplet augment(const TrainingTriplet& triplet, Rng& rng, const AugmentConfig& config, int out_h, int out_w);

struct TripletBatch {
  torch::Tensor input_t, input_t1;          // B x 3 x H x W
  torch::Tensor light_i, light_j, light_k;  // B x 768
  torch::Tensor target_k_t, target_k_t1;
  torch::Tensor mask_t, mask_t1;        // B x 1 x H x W
  torch::Tensor parsing_t, parsing_t1;  // B x C x H x W
  torch::Tensor flow_fwd, flow_bwd;     // B x 2 x H x W
};

TripletBatch collate(std::span<const TrainingTriplet> triplets);

// Loss weights active at a step: the configured weights from warmup_steps on,
// and before that the same weights with latent, temporal and adversarial off.
LossWeights progressive_schedule(std::int64_t step, const TrainConfig& config);

// Learning rate used at a step under the configured schedule.
double learning_rate_at(std::int64_t step, const TrainConfig& config);

// Which parameter sets received a nonzero gradient in each sub-step.
struct GradientRouting {
  bool discriminator_step_ran = false;
  int disc_step_disc_params = 0;  // discriminator params touched by adv_d
  int disc_step_gen_params = 0;   // generator params touched by adv_d (must be 0)
  int gen_step_gen_params = 0;    // generator params touched by the generator loss
  int gen_step_disc_params = 0;   // discriminator params touched by it (must be 0)
};

struct StepResult {
  LossBreakdown losses;  // total is the generator-phase total
  LossWeights active;
  bool empty_mask = false;
  GradientRouting routing;
  double max_abs_disc_param = 0.0;
};

class Trainer {
 public:
  // train_set must be non-empty; library supplies the uniform lighting draws.
  Trainer(TrainConfig config, std::vector<OlatSequence> train_set, std::vector<LightMap> library);

  // Samples a batch for the current step and runs train_step.
  StepResult step();
  // One discriminator sub-step (skipped when the active adversarial weight is
  // 0) followed by one generator sub-step. Throws TrainingError on a
  // non-finite loss.
  StepResult train_step(const TripletBatch& batch, const LossWeights& active);
  // Draws the next batch without training on it.
  TripletBatch sample_batch();

  // Runs until config.steps. The callback sees every step's result and may
  // return false to stop early.
  void run(const std::function<bool(std::int64_t, const StepResult&)>& on_step = {});

  void save(const std::filesystem::path& path) const;

  std::int64_t steps_done() const { return step_; }
  const TrainConfig& config() const { return config_; }
  RelightNet& net() { return net_; }
  Discriminator& disc() { return disc_; }

 private:
  TrainConfig config_;
  std::vector<OlatSequence> train_set_;
  std::vector<LightMap> library_;
  Rng rng_;
  RelightNet net_{nullptr};
  Discriminator disc_{nullptr};
  std::unique_ptr<torch::optim::RMSprop> opt_g_;
  std::unique_ptr<torch::optim::RMSprop> opt_d_;
  std::int64_t step_ = 0;
};

// One JSON line of the training log.
nlohmann::json step_log_line(std::int64_t step, const StepResult& result);

// Holds out every fourth identity (sorted identity ids) as the test split.
struct DataSplit {
  std::vector<OlatSequence> train;
  std::vector<OlatSequence> test;
};
DataSplit split_by_identity(std::vector<OlatSequence> sequences, int holdout_every = 4);

}  // namespace relight
