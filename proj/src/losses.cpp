#include "relight/losses.hpp"

#include <cmath>
#include <sstream>

#include "relight/errors.hpp"
#include "relight/flow.hpp"

namespace relight {

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << what << ": shapes differ " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(msg.str());
  }
}

void require_mask(const torch::Tensor& image, const torch::Tensor& mask, const char* what) {
  if (image.dim() != 4 || mask.dim() != 4 || mask.size(1) != 1 || mask.size(0) != image.size(0) ||
      mask.size(2) != image.size(2) || mask.size(3) != image.size(3)) {
    std::ostringstream msg;
    msg << what << ": expected B x C x H x W images with a B x 1 x H x W mask, got " << image.sizes() << " and "
        << mask.sizes();
    throw ShapeError(msg.str());
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {lambda1, lambda2, lambda3, lambda4, lambda5}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"lambda1", lambda1}, {"lambda2", lambda2}, {"lambda3", lambda3}, {"lambda4", lambda4}, {"lambda5", lambda5}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.lambda1 = j.value("lambda1", w.lambda1);
  w.lambda2 = j.value("lambda2", w.lambda2);
  w.lambda3 = j.value("lambda3", w.lambda3);
  w.lambda4 = j.value("lambda4", w.lambda4);
  w.lambda5 = j.value("lambda5", w.lambda5);
  w.validate();
  return w;
}

nlohmann::json LossBreakdown::to_json() const {
  return {{"basic", basic}, {"latent", latent},   {"parsing", parsing}, {"temporal", temporal},
          {"adv_d", adv_d}, {"adv_g", adv_g}, {"total", total}};
}

LossBreakdown total_loss(const LossTerms<double>& terms, const LossWeights& weights, Phase phase) {
  LossBreakdown b{terms.basic, terms.latent, terms.parsing, terms.temporal, terms.adv_d, terms.adv_g, 0.0};
  b.total = weighted_total(terms, weights, phase);
  return b;
}

torch::Tensor masked_l1(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& mask) {
  require_same(a, b, "masked_l1");
  require_mask(a, mask, "masked_l1");
  const auto m = mask.to(a.scalar_type());
  const auto numer = ((a - b).abs() * m).sum({1, 2, 3});
  const auto denom = m.sum({1, 2, 3}) * a.size(1);
  return numer / denom.clamp_min(1.0) * (denom > 0).to(a.scalar_type());
}

torch::Tensor log_light_loss(const torch::Tensor& light_gt, const torch::Tensor& light_hat) {
  require_same(light_gt, light_hat, "log_light_loss");
  if (light_gt.dim() != 2 || light_gt.size(1) != 768) throw ShapeError("log_light_loss: expected B x 768 lights");
  return 0.5 * (torch::log1p(light_gt) - torch::log1p(light_hat)).pow(2).sum(1);
}

BasicLoss basic_loss(const torch::Tensor& light_gt, const torch::Tensor& light_hat, const torch::Tensor& target_gt,
                     const torch::Tensor& target_relit, const torch::Tensor& self_gt, const torch::Tensor& self_relit,
                     const torch::Tensor& mask) {
  require_same(target_gt, self_gt, "basic_loss");
  require_mask(target_gt, mask, "basic_loss");
  if (light_gt.size(0) != target_gt.size(0)) throw ShapeError("basic_loss: light and image batch sizes differ");
  const auto per_item = log_light_loss(light_gt, light_hat) + masked_l1(target_gt, target_relit, mask) +
                        masked_l1(self_gt, self_relit, mask);
  const bool empty = (mask.sum({1, 2, 3}) == 0).any().item<bool>();
  return {per_item.mean(), empty};
}

torch::Tensor latent_loss(const torch::Tensor& e_hat, const torch::Tensor& e_tilde) {
  require_same(e_hat, e_tilde, "latent_loss");
  if (e_hat.dim() != 2) throw ShapeError("latent_loss: expected B x D codes");
  return (e_hat - e_tilde).pow(2).sum(1).mean();
}

torch::Tensor parsing_loss(const torch::Tensor& parsing_gt, const torch::Tensor& parsing_hat) {
  require_same(parsing_gt, parsing_hat, "parsing_loss");
  constexpr double kClamp = 1e-7;
  const auto p = parsing_hat.clamp(kClamp, 1.0 - kClamp);
  return -(parsing_gt * torch::log(p) + (1 - parsing_gt) * torch::log(1 - p)).mean();
}

AdversarialLosses adversarial_losses(const Critic& critic, const torch::Tensor& source, const torch::Tensor& fake,
                                     const torch::Tensor& real, const torch::Tensor& light) {
  require_same(fake, real, "adversarial_losses");
  require_same(source, real, "adversarial_losses");
  const auto d_real = critic(source, real, light);
  const auto d_fake = critic(source, fake, light);
  return {(-d_real + d_fake).mean(), (-d_fake).mean()};
}

torch::Tensor temporal_loss(const torch::Tensor& relit_k_t, const torch::Tensor& relit_k_t1,
                            const torch::Tensor& self_i_t, const torch::Tensor& self_i_t1,
                            const torch::Tensor& self_j_t, const torch::Tensor& self_j_t1,
                            const torch::Tensor& flow_fwd, const torch::Tensor& flow_bwd) {
  for (const auto* t : {&relit_k_t1, &self_i_t, &self_i_t1, &self_j_t, &self_j_t1}) {
    require_same(relit_k_t, *t, "temporal_loss");
  }
  require_same(flow_fwd, flow_bwd, "temporal_loss(flow)");
  auto pair = [&](const torch::Tensor& at_t, const torch::Tensor& at_t1) {
    const auto fwd = warp(at_t, flow_fwd);
    const auto bwd = warp(at_t1, flow_bwd);
    return masked_l1(fwd.image, at_t1, fwd.valid) + masked_l1(bwd.image, at_t, bwd.valid);
  };
  return (pair(relit_k_t, relit_k_t1) + pair(self_i_t, self_i_t1) + pair(self_j_t, self_j_t1)).mean();
}

}  // namespace relight
