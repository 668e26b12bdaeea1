#include "relight/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <random>
#include <set>

#include "relight/checkpoint.hpp"
#include "relight/errors.hpp"
#include "relight/tensor_image.hpp"

namespace relight {

namespace {

Image flow_to_image(const FlowField& flow) {
  Image img(flow.height, flow.width, 2);
  img.data = flow.vectors;
  return img;
}

FlowField image_to_flow(const Image& img, FlowDirection direction, float sx, float sy) {
  FlowField flow(img.height, img.width, direction);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    flow.vectors[2 * i] = img.data[2 * i] * sx;
    flow.vectors[2 * i + 1] = img.data[2 * i + 1] * sy;
  }
  return flow;
}

// (set, frame) pairs are drawn uniformly over all adjacent frame pairs.
std::vector<std::pair<int, int>> pair_index(const std::vector<OlatSequence>& sequences) {
  std::vector<std::pair<int, int>> index;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (int t = 0; t + 1 < static_cast<int>(sequences[s].frames.size()); ++t) index.emplace_back(static_cast<int>(s), t);
  }
  return index;
}

int count_touched(const std::vector<torch::Tensor>& params) {
  int n = 0;
  for (const auto& p : params) {
    if (p.grad().defined() && p.grad().abs().sum().item<double>() > 0.0) ++n;
  }
  return n;
}

// Freezes a module's parameters for the lifetime of the guard.
class FreezeGuard {
 public:
  explicit FreezeGuard(torch::nn::Module& module) : params_(module.parameters()) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

}  // namespace

void AugmentConfig::validate() const {
  if (!(min_scale > 0.0) || !(max_scale <= 1.0) || min_scale > max_scale) {
    throw ConfigError("augment: need 0 < min_scale <= max_scale <= 1");
  }
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  augment.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (lr_schedule != "constant" && lr_schedule != "cosine") {
    throw ConfigError("train: lr_schedule must be \"constant\" or \"cosine\"");
  }
  if (!(lr_min_ratio >= 0.0 && lr_min_ratio <= 1.0)) throw ConfigError("train: lr_min_ratio must be in [0, 1]");
  if (!(clip > 0.0)) throw ConfigError("train: clip must be > 0");
  if (batch_size <= 0 || steps < 0 || warmup_steps < 0 || disc_steps <= 0 || checkpoint_every <= 0) {
    throw ConfigError("train: batch_size, disc_steps and checkpoint_every must be positive; steps and warmup_steps >= 0");
  }
  if (!(exposure > 0.0f)) throw ConfigError("train: exposure must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"weights", weights.to_json()},
          {"augment", {{"enabled", augment.enabled}, {"min_scale", augment.min_scale}, {"max_scale", augment.max_scale}}},
          {"learning_rate", learning_rate},
          {"lr_schedule", lr_schedule},
          {"lr_min_ratio", lr_min_ratio},
          {"clip", clip},
          {"rmsprop_alpha", rmsprop_alpha},
          {"rmsprop_eps", rmsprop_eps},
          {"batch_size", batch_size},
          {"steps", steps},
          {"warmup_steps", warmup_steps},
          {"disc_steps", disc_steps},
          {"checkpoint_every", checkpoint_every},
          {"exposure", exposure},
          {"seed", seed},
          {"log", "natural"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("weights")) c.weights = LossWeights::from_json(j.at("weights"));
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      c.augment.enabled = a.value("enabled", c.augment.enabled);
      c.augment.min_scale = a.value("min_scale", c.augment.min_scale);
      c.augment.max_scale = a.value("max_scale", c.augment.max_scale);
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
    c.lr_min_ratio = j.value("lr_min_ratio", c.lr_min_ratio);
    c.clip = j.value("clip", c.clip);
    c.rmsprop_alpha = j.value("rmsprop_alpha", c.rmsprop_alpha);
    c.rmsprop_eps = j.value("rmsprop_eps", c.rmsprop_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.disc_steps = j.value("disc_steps", c.disc_steps);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.exposure = j.value("exposure", c.exposure);
    c.seed = j.value("seed", c.seed);
    if (j.value("log", std::string("natural")) != "natural") throw ConfigError("train: only the natural log is supported");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingTriplet build_triplet(const OlatSequence& seq, int t, Rng& rng, std::span<const LightMap> library,
                              const TripletOverrides& overrides, float exposure) {
  if (t < 0 || t + 1 >= static_cast<int>(seq.frames.size())) {
    throw ConfigError("build_triplet: frame pair (" + std::to_string(t) + ", " + std::to_string(t + 1) +
                      ") out of range for " + std::to_string(seq.frames.size()) + " frames");
  }
  const auto& a = seq.frames[t];
  const auto& b = seq.frames[t + 1];
  if (!b.flow_to_prev || !a.flow_to_next) throw ShapeError("build_triplet: frames lack ground-truth flow");
  const auto& dirs = seq.light_directions;
  TrainingTriplet out;
  out.lights = sample_triplet(rng, library, overrides);
  out.input_t = composite_relit(a, dirs, out.lights.L_i, exposure);
  out.input_t1 = composite_relit(b, dirs, out.lights.L_j, exposure);
  out.target_k_t = composite_relit(a, dirs, out.lights.L_k, exposure);
  out.target_k_t1 = composite_relit(b, dirs, out.lights.L_k, exposure);
  out.target_j_t = composite_relit(a, dirs, out.lights.L_j, exposure);
  out.target_i_t1 = composite_relit(b, dirs, out.lights.L_i, exposure);
  out.mask_t = a.foreground;
  out.mask_t1 = b.foreground;
  out.parsing_t = a.parsing;
  out.parsing_t1 = b.parsing;
  out.flow_fwd = *b.flow_to_prev;
  out.flow_fwd.direction = FlowDirection::kForward;
  out.flow_bwd = *a.flow_to_next;
  out.flow_bwd.direction = FlowDirection::kBackward;
  return out;
}

TrainingTriplet crop_and_resize(const TrainingTriplet& in, int y0, int x0, int h, int w, int out_h, int out_w) {
  const int H = in.input_t.height, W = in.input_t.width;
  if (h <= 0 || w <= 0 || y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W || out_h <= 0 || out_w <= 0) {
    throw ConfigError("crop_and_resize: window outside the frame");
  }
  const bool same = h == out_h && w == out_w;
  auto smooth = [&](const Image& img) {
    auto c = crop(img, y0, x0, h, w);
    return same ? c : resize_bilinear(c, out_h, out_w);
  };
  auto nearest = [&](const Image& img) {
    auto c = crop(img, y0, x0, h, w);
    return same ? c : resize_nearest(c, out_h, out_w);
  };
  const float sx = static_cast<float>(out_w) / static_cast<float>(w);
  const float sy = static_cast<float>(out_h) / static_cast<float>(h);
  auto flow = [&](const FlowField& f) {
    return same && h == H && w == W ? f : image_to_flow(smooth(flow_to_image(f)), f.direction, sx, sy);
  };
  TrainingTriplet out;
  out.lights = in.lights;
  out.input_t = smooth(in.input_t);
  out.input_t1 = smooth(in.input_t1);
  out.target_k_t = smooth(in.target_k_t);
  out.target_k_t1 = smooth(in.target_k_t1);
  out.target_j_t = smooth(in.target_j_t);
  out.target_i_t1 = smooth(in.target_i_t1);
  out.mask_t = nearest(in.mask_t);
  out.mask_t1 = nearest(in.mask_t1);
  out.parsing_t = smooth(in.parsing_t);
  out.parsing_t1 = smooth(in.parsing_t1);
  out.flow_fwd = flow(in.flow_fwd);
  out.flow_bwd = flow(in.flow_bwd);
  return out;
}

TrainingTriplet augment(const TrainingTriplet& triplet, Rng& rng, const AugmentConfig& config, int out_h, int out_w) {
  config.validate();
  const int H = triplet.input_t.height, W = triplet.input_t.width;
  if (!config.enabled) return crop_and_resize(triplet, 0, 0, H, W, out_h, out_w);
  std::uniform_real_distribution<double> scale_dist(config.min_scale, config.max_scale);
  const double s = scale_dist(rng);
  const int h = std::clamp(static_cast<int>(std::lround(s * H)), 1, H);
  const int w = std::clamp(static_cast<int>(std::lround(s * W)), 1, W);
  const int y0 = std::uniform_int_distribution<int>(0, H - h)(rng);
  const int x0 = std::uniform_int_distribution<int>(0, W - w)(rng);
  return crop_and_resize(triplet, y0, x0, h, w, out_h, out_w);
}

TripletBatch collate(std::span<const TrainingTriplet> triplets) {
  if (triplets.empty()) throw ConfigError("collate: empty batch");
  auto images = [&](auto member) {
    std::vector<torch::Tensor> parts;
    for (const auto& t : triplets) parts.push_back(to_tensor(t.*member));
    return torch::stack(parts);
  };
  auto lights = [&](auto member) {
    std::vector<torch::Tensor> parts;
    for (const auto& t : triplets) parts.push_back(to_tensor(t.lights.*member));
    return torch::stack(parts);
  };
  auto flows = [&](auto member) {
    std::vector<torch::Tensor> parts;
    for (const auto& t : triplets) parts.push_back(to_tensor(t.*member));
    return torch::stack(parts);
  };
  TripletBatch b;
  b.input_t = images(&TrainingTriplet::input_t);
  b.input_t1 = images(&TrainingTriplet::input_t1);
  b.light_i = lights(&LightTriplet::L_i);
  b.light_j = lights(&LightTriplet::L_j);
  b.light_k = lights(&LightTriplet::L_k);
  b.target_k_t = images(&TrainingTriplet::target_k_t);
  b.target_k_t1 = images(&TrainingTriplet::target_k_t1);
  b.mask_t = images(&TrainingTriplet::mask_t);
  b.mask_t1 = images(&TrainingTriplet::mask_t1);
  b.parsing_t = images(&TrainingTriplet::parsing_t);
  b.parsing_t1 = images(&TrainingTriplet::parsing_t1);
  b.flow_fwd = flows(&TrainingTriplet::flow_fwd);
  b.flow_bwd = flows(&TrainingTriplet::flow_bwd);
  return b;
}

LossWeights progressive_schedule(std::int64_t step, const TrainConfig& config) {
  LossWeights w = config.weights;
  if (step < config.warmup_steps) {
    w.lambda2 = 0.0;
    w.lambda4 = 0.0;
    w.lambda5 = 0.0;
  }
  return w;
}

Trainer::Trainer(TrainConfig config, std::vector<OlatSequence> train_set, std::vector<LightMap> library)
    : config_(std::move(config)), train_set_(std::move(train_set)), library_(std::move(library)), rng_(config_.seed) {
  config_.validate();
  if (train_set_.empty() || pair_index(train_set_).empty()) throw ConfigError("train: no adjacent frame pairs");
  if (library_.empty()) throw ConfigError("train: empty light library");
  torch::manual_seed(config_.seed);
  net_ = RelightNet(config_.model);
  disc_ = Discriminator(config_.model);
  {
    // The critic starts inside the clip box so the bound holds before its first update.
    torch::NoGradGuard no_grad;
    for (auto& p : disc_->parameters()) p.clamp_(-config_.clip, config_.clip);
  }
  const auto options = torch::optim::RMSpropOptions(config_.learning_rate)
                           .alpha(config_.rmsprop_alpha)
                           .eps(config_.rmsprop_eps);
  opt_g_ = std::make_unique<torch::optim::RMSprop>(net_->parameters(), options);
  opt_d_ = std::make_unique<torch::optim::RMSprop>(disc_->parameters(), options);
}

TripletBatch Trainer::sample_batch() {
  const auto index = pair_index(train_set_);
  std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
  std::vector<TrainingTriplet> triplets;
  for (int b = 0; b < config_.batch_size; ++b) {
    const auto [s, t] = index[pick(rng_)];
    auto triplet = build_triplet(train_set_[s], t, rng_, library_, {}, config_.exposure);
    triplets.push_back(augment(triplet, rng_, config_.augment, config_.model.height, config_.model.width));
  }
  return collate(triplets);
}

StepResult Trainer::train_step(const TripletBatch& batch, const LossWeights& active) {
  active.validate();
  net_->train();
  disc_->train();
  StepResult result;
  result.active = active;
  const auto B = batch.input_t.size(0);

  // Both frames share one pass: rows [0, B) are frame t, rows [B, 2B) frame t+1.
  const auto inputs = torch::cat({batch.input_t, batch.input_t1});
  const auto light_gt = torch::cat({batch.light_i, batch.light_j});
  const auto light_k = torch::cat({batch.light_k, batch.light_k});
  const auto targets_k = torch::cat({batch.target_k_t, batch.target_k_t1});
  const auto masks = torch::cat({batch.mask_t, batch.mask_t1});
  const auto parsing_gt = torch::cat({batch.parsing_t, batch.parsing_t1});

  auto enc = net_->encode(inputs);
  const auto self = net_->decode(enc.light_pred, enc.skips, enc.structure);
  const auto relit_k = net_->decode(light_k, enc.skips, enc.structure);

  LossTerms<torch::Tensor> terms;
  const auto zero = torch::zeros({}, inputs.options());
  const auto basic = basic_loss(light_gt, enc.light_pred, targets_k, relit_k.image, inputs, self.image, masks);
  result.empty_mask = basic.empty_mask;
  terms.basic = basic.value;
  terms.parsing = parsing_loss(parsing_gt, self.parsing);
  terms.latent = zero;
  terms.temporal = zero;
  terms.adv_d = zero;
  terms.adv_g = zero;

  if (active.lambda2 > 0.0) terms.latent = latent_loss(enc.structure, net_->encode(relit_k.image).structure);

  if (active.lambda4 > 0.0) {
    // Each frame decoded with the other frame's predicted light.
    const auto swapped = torch::cat({enc.light_pred.slice(0, B), enc.light_pred.slice(0, 0, B)});
    const auto cross = net_->decode(swapped, enc.skips, enc.structure).image;
    const auto k = relit_k.image;
    terms.temporal = temporal_loss(k.slice(0, 0, B), k.slice(0, B), self.image.slice(0, 0, B), cross.slice(0, B),
                                   cross.slice(0, 0, B), self.image.slice(0, B), batch.flow_fwd, batch.flow_bwd);
  }

  const Critic critic = [this](const torch::Tensor& s, const torch::Tensor& r, const torch::Tensor& l) {
    return disc_->forward(s, r, l);
  };
  double adv_d_value = 0.0;
  if (active.lambda5 > 0.0) {
    result.routing.discriminator_step_ran = true;
    const auto fake = relit_k.image.detach();
    for (int d = 0; d < config_.disc_steps; ++d) {
      opt_d_->zero_grad();
      net_->zero_grad();
      const auto adv = adversarial_losses(critic, inputs, fake, targets_k, light_k);
      LossTerms<torch::Tensor> d_terms;
      d_terms.adv_d = adv.adv_d;
      const auto d_loss = weighted_total(d_terms, active, Phase::kDiscriminator);
      if (!std::isfinite(d_loss.item<double>())) {
        throw TrainingError("non-finite discriminator loss at step " + std::to_string(step_));
      }
      d_loss.backward();
      result.routing.disc_step_disc_params = count_touched(disc_->parameters());
      result.routing.disc_step_gen_params = count_touched(net_->parameters());
      opt_d_->step();
      torch::NoGradGuard no_grad;
      for (auto& p : disc_->parameters()) p.clamp_(-config_.clip, config_.clip);
      adv_d_value = adv.adv_d.item<double>();
    }
    FreezeGuard frozen(*disc_);
    terms.adv_g = adversarial_losses(critic, inputs, relit_k.image, targets_k, light_k).adv_g;
    opt_d_->zero_grad();
    const auto total = weighted_total(terms, active, Phase::kGenerator);
    opt_g_->zero_grad();
    total.backward();
    result.losses.total = total.item<double>();
  } else {
    opt_g_->zero_grad();
    const auto total = weighted_total(terms, active, Phase::kGenerator);
    total.backward();
    result.losses.total = total.item<double>();
  }

  result.losses.basic = terms.basic.item<double>();
  result.losses.latent = terms.latent.item<double>();
  result.losses.parsing = terms.parsing.item<double>();
  result.losses.temporal = terms.temporal.item<double>();
  result.losses.adv_d = adv_d_value;
  result.losses.adv_g = terms.adv_g.item<double>();
  if (!std::isfinite(result.losses.total)) {
    throw TrainingError("non-finite generator loss at step " + std::to_string(step_) + ": " +
                        result.losses.to_json().dump());
  }
  result.routing.gen_step_gen_params = count_touched(net_->parameters());
  result.routing.gen_step_disc_params = count_touched(disc_->parameters());
  const double lr = learning_rate_at(step_, config_);
  for (auto& group : opt_g_->param_groups()) {
    static_cast<torch::optim::RMSpropOptions&>(group.options()).lr(lr);
  }
  opt_g_->step();

  double max_abs = 0.0;
  for (const auto& p : disc_->parameters()) max_abs = std::max(max_abs, p.detach().abs().max().item<double>());
  result.max_abs_disc_param = max_abs;
  ++step_;
  return result;
}

double learning_rate_at(std::int64_t step, const TrainConfig& config) {
  if (config.lr_schedule == "constant" || config.steps <= 1) return config.learning_rate;
  const double t = std::clamp(static_cast<double>(step) / (config.steps - 1), 0.0, 1.0);
  const double floor = config.lr_min_ratio * config.learning_rate;
  return floor + 0.5 * (config.learning_rate - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

StepResult Trainer::step() { return train_step(sample_batch(), progressive_schedule(step_, config_)); }

void Trainer::run(const std::function<bool(std::int64_t, const StepResult&)>& on_step) {
  while (step_ < config_.steps) {
    const auto r = step();
    if (on_step && !on_step(step_, r)) break;
  }
}

void Trainer::save(const std::filesystem::path& path) const {
  auto net = net_;
  auto disc = disc_;
  save_checkpoint(path, net, &disc, step_, {{"train_config", config_.to_json()}});
}

nlohmann::json step_log_line(std::int64_t step, const StepResult& result) {
  auto line = result.losses.to_json();
  line["step"] = step;
  line["weights"] = result.active.to_json();
  line["empty_mask"] = result.empty_mask;
  line["max_abs_disc_param"] = result.max_abs_disc_param;
  return line;
}

DataSplit split_by_identity(std::vector<OlatSequence> sequences, int holdout_every) {
  if (holdout_every <= 1) throw ConfigError("split: holdout_every must be >= 2");
  std::set<std::string> ids;
  for (const auto& s : sequences) ids.insert(s.identity_id);
  std::map<std::string, int> rank;
  int r = 0;
  for (const auto& id : ids) rank[id] = r++;
  DataSplit split;
  for (auto& s : sequences) {
    (rank[s.identity_id] % holdout_every == holdout_every - 1 ? split.test : split.train).push_back(std::move(s));
  }
  return split;
}

}  // namespace relight
