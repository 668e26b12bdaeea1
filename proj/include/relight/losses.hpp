#pragma once

#include <functional>

#include <json.hpp>
#include <torch/torch.h>

namespace relight {

struct LossWeights {
  double lambda1 = 1.0;  // basic
  double lambda2 = 1.0;  // latent
  double lambda3 = 1.0;  // parsing
  double lambda4 = 1.0;  // temporal
  double lambda5 = 1.0;  // adversarial

  // Throws ConfigError on negative or non-finite weights.
  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
  bool operator==(const LossWeights&) const = default;
};

enum class Phase { kGenerator, kDiscriminator };

// Loss components as tensors (training) or plain numbers (reporting).
template <typename T>
struct LossTerms {
  T basic{};
  T latent{};
  T parsing{};
  T temporal{};
  T adv_d{};
  T adv_g{};
};

// Generator phase: l1 basic + l2 latent + l3 parsing + l4 temporal + l5 adv_g.
// Discriminator phase: l5 adv_d only.
template <typename T>
T weighted_total(const LossTerms<T>& terms, const LossWeights& w, Phase phase) {
  w.validate();
  if (phase == Phase::kDiscriminator) return terms.adv_d * w.lambda5;
  return terms.basic * w.lambda1 + terms.latent * w.lambda2 + terms.parsing * w.lambda3 +
         terms.temporal * w.lambda4 + terms.adv_g * w.lambda5;
}

struct LossBreakdown {
  double basic = 0.0;
  double latent = 0.0;
  double parsing = 0.0;
  double temporal = 0.0;
  double adv_d = 0.0;
  double adv_g = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
  bool operator==(const LossBreakdown&) const = default;
};

// Builds a breakdown whose total follows weighted_total for the phase.
LossBreakdown total_loss(const LossTerms<double>& terms, const LossWeights& weights, Phase phase);

// Per-item mean of |a - b| over masked pixels and all channels: [B].
// a, b: B x C x H x W; mask: B x 1 x H x W. Items with an empty mask give 0.
torch::Tensor masked_l1(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& mask);

// Per-item 1/2 ||log(1 + L) - log(1 + L_hat)||^2 over the 768 entries: [B].
torch::Tensor log_light_loss(const torch::Tensor& light_gt, const torch::Tensor& light_hat);

struct BasicLoss {
  torch::Tensor value;      // scalar, batch mean
  bool empty_mask = false;  // some item had no foreground; its photometric terms are 0
};

BasicLoss basic_loss(const torch::Tensor& light_gt, const torch::Tensor& light_hat, const torch::Tensor& target_gt,
                     const torch::Tensor& target_relit, const torch::Tensor& self_gt, const torch::Tensor& self_relit,
                     const torch::Tensor& mask);

// Batch mean of ||e_hat - e_tilde||^2.
torch::Tensor latent_loss(const torch::Tensor& e_hat, const torch::Tensor& e_tilde);

// Binary cross-entropy averaged over items, channels and pixels, with the
// prediction clamped to [1e-7, 1 - 1e-7].
torch::Tensor parsing_loss(const torch::Tensor& parsing_gt, const torch::Tensor& parsing_hat);

using Critic = std::function<torch::Tensor(const torch::Tensor& source, const torch::Tensor& relit,
                                           const torch::Tensor& light)>;

struct AdversarialLosses {
  torch::Tensor adv_d;  // -D(source, real, L) + D(source, fake, L), batch mean
  torch::Tensor adv_g;  // -D(source, fake, L), batch mean
};

// Pure evaluation; which parameters each term may update is the trainer's job.
AdversarialLosses adversarial_losses(const Critic& critic, const torch::Tensor& source, const torch::Tensor& fake,
                                     const torch::Tensor& real, const torch::Tensor& light);

// Six masked-mean L1 terms. flow_fwd realizes f_{t,t+1} (gathers frame t onto
// frame t+1's grid) and flow_bwd realizes f_{t+1,t}. Pixels whose sample
// leaves the frame are excluded. Batch mean.
torch::Tensor temporal_loss(const torch::Tensor& relit_k_t, const torch::Tensor& relit_k_t1,
                            const torch::Tensor& self_i_t, const torch::Tensor& self_i_t1,
                            const torch::Tensor& self_j_t, const torch::Tensor& self_j_t1,
                            const torch::Tensor& flow_fwd, const torch::Tensor& flow_bwd);

}  // namespace relight
