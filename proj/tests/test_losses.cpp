#include "torch_doctest.hpp"

#include <cmath>

#include "grad_check.hpp"
#include "relight/errors.hpp"
#include "relight/losses.hpp"
#include "relight/model.hpp"

using namespace relight;
using relight::testing::check_gradient;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

// Random values whose pairwise differences stay away from the |x| kink.
torch::Tensor offset_from(const torch::Tensor& base, std::uint64_t seed) {
  torch::manual_seed(seed);
  const auto sign = torch::randint(0, 2, base.sizes(), kF64) * 2 - 1;
  return base + sign * (0.05 + 0.2 * torch::rand(base.sizes(), kF64));
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.height = 8;
  c.width = 8;
  c.depth = 2;
  c.widths = {4, 6};
  c.structure_dim = 4;
  c.light_embedding = 4;
  c.light_head_channels = 2;
  c.disc_width = 4;
  return c;
}

}  // namespace

TEST_CASE("basic loss hand values") {
  const auto light = torch::rand({2, 768});
  const auto img = torch::rand({2, 3, 4, 4});
  const auto full = torch::ones({2, 1, 4, 4});
  const auto zero = basic_loss(light, light, img, img, img, img, full);
  CHECK(zero.value.item<double>() == 0.0);
  CHECK_FALSE(zero.empty_mask);

  const auto a = torch::full({2, 3, 4, 4}, 0.5);
  const auto b = torch::full({2, 3, 4, 4}, 0.25);
  CHECK(basic_loss(light, light, a, b, a, b, full).value.item<double>() == 0.5);

  const auto none = basic_loss(light, torch::zeros({2, 768}), a, b, a, b, torch::zeros({2, 1, 4, 4}));
  CHECK(none.empty_mask);
  CHECK(none.value.item<double>() == doctest::Approx(log_light_loss(light, torch::zeros({2, 768})).mean().item<double>()));

  // Log-light term: 1/2 * 768 * ln(2)^2 for L = 1 vs 0.
  CHECK(log_light_loss(torch::ones({1, 768}), torch::zeros({1, 768})).item<double>() ==
        doctest::Approx(384.0 * std::log(2.0) * std::log(2.0)).epsilon(1e-6));
  CHECK_THROWS_AS(basic_loss(light, light, a, b, a, b, torch::ones({2, 1, 4, 5})), ShapeError);
}

TEST_CASE("masked terms ignore the background") {
  torch::manual_seed(1);
  const auto light = torch::rand({1, 768});
  const auto gt = torch::rand({1, 3, 6, 6});
  auto pred = torch::rand({1, 3, 6, 6});
  auto mask = torch::zeros({1, 1, 6, 6});
  mask.slice(2, 1, 4).slice(3, 2, 5).fill_(1.0);
  const double before = basic_loss(light, light, gt, pred, gt, pred, mask).value.item<double>();
  const auto bg = (1 - mask).expand({1, 3, 6, 6});
  const auto pred2 = pred + bg * torch::randn({1, 3, 6, 6}) * 5;
  const auto gt2 = gt - bg * 3;
  CHECK(basic_loss(light, light, gt2, pred2, gt2, pred2, mask).value.item<double>() == before);
}

TEST_CASE("latent loss hand values") {
  const auto e = torch::tensor({{1.0, 2.0}}, kF64);
  CHECK(latent_loss(e, e).item<double>() == 0.0);
  CHECK(latent_loss(e, torch::tensor({{1.0, 3.0}}, kF64)).item<double>() == 1.0);
  CHECK(latent_loss(e, torch::tensor({{4.0, 6.0}}, kF64)).item<double>() == 25.0);
  CHECK_THROWS_AS(latent_loss(e, torch::zeros({1, 3}, kF64)), ShapeError);

  // A stub encoder that reproduces the structure code exactly gives zero.
  auto stub_encoder = [&](const torch::Tensor&) { return e.clone(); };
  CHECK(latent_loss(e, stub_encoder(torch::rand({1, 3, 4, 4}))).item<double>() == 0.0);
}

TEST_CASE("parsing loss hand values and symmetry") {
  torch::manual_seed(2);
  const auto p = (torch::rand({2, 3, 4, 4}) > 0.5).to(torch::kFloat32);
  CHECK(parsing_loss(p, p).item<double>() <= 1e-6);
  CHECK(parsing_loss(p, torch::full_like(p, 0.5)).item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const auto soft = torch::rand({2, 3, 4, 4}, kF64);
  const auto hat = torch::rand({2, 3, 4, 4}, kF64);
  CHECK(parsing_loss(soft, hat).item<double>() ==
        doctest::Approx(parsing_loss(1 - soft, 1 - hat).item<double>()).epsilon(1e-12));
  CHECK(std::isfinite(parsing_loss(p, 1 - p).item<double>()));
}

TEST_CASE("adversarial loss hand values") {
  const auto src = torch::rand({2, 3, 4, 4});
  const auto real = torch::rand({2, 3, 4, 4});
  const auto fake = torch::rand({2, 3, 4, 4});
  const auto light = torch::rand({2, 768});
  const Critic constant = [](const torch::Tensor& s, const torch::Tensor&, const torch::Tensor&) {
    return torch::full({s.size(0)}, 4.5);
  };
  CHECK(adversarial_losses(constant, src, fake, real, light).adv_d.item<double>() == 0.0);

  const Critic split = [&](const torch::Tensor&, const torch::Tensor& relit, const torch::Tensor&) {
    return torch::full({relit.size(0)}, relit.equal(real) ? 3.0 : 1.0);
  };
  const auto hand = adversarial_losses(split, src, fake, real, light);
  CHECK(hand.adv_d.item<double>() == -2.0);
  CHECK(hand.adv_g.item<double>() == -1.0);

  torch::manual_seed(3);
  Discriminator disc(tiny_config());
  const Critic critic = [&](const torch::Tensor& s, const torch::Tensor& r, const torch::Tensor& l) {
    return disc(s, r, l);
  };
  const auto s8 = torch::rand({3, 3, 8, 8}), r8 = torch::rand({3, 3, 8, 8}), f8 = torch::rand({3, 3, 8, 8});
  const auto l8 = torch::rand({3, 768});
  const auto adv = adversarial_losses(critic, s8, f8, r8, l8);
  const double identity =
      adv.adv_d.item<double>() + disc(s8, r8, l8).mean().item<double>() - disc(s8, f8, l8).mean().item<double>();
  CHECK(std::abs(identity) < 1e-6);
}

TEST_CASE("temporal loss hand values and symmetry") {
  const auto zero_flow = torch::zeros({1, 2, 4, 4});
  const auto a = torch::rand({1, 3, 4, 4}) * 0.8;
  CHECK(temporal_loss(a, a, a, a, a, a, zero_flow, zero_flow).item<double>() == 0.0);
  const auto b = a + 0.1;
  CHECK(temporal_loss(a, b, a, b, a, b, zero_flow, zero_flow).item<double>() == doctest::Approx(0.6).epsilon(1e-6));

  torch::manual_seed(4);
  std::vector<torch::Tensor> img;
  for (int i = 0; i < 6; ++i) img.push_back(torch::rand({2, 3, 6, 6}, kF64));
  const auto fwd = torch::randn({2, 2, 6, 6}, kF64);
  const auto bwd = torch::randn({2, 2, 6, 6}, kF64);
  const double forward = temporal_loss(img[0], img[1], img[2], img[3], img[4], img[5], fwd, bwd).item<double>();
  const double swapped = temporal_loss(img[1], img[0], img[3], img[2], img[5], img[4], bwd, fwd).item<double>();
  CHECK(forward == doctest::Approx(swapped).epsilon(1e-12));
  CHECK_THROWS_AS(temporal_loss(a, a, a, a, a, a, torch::zeros({1, 2, 4, 5}), zero_flow), ShapeError);
}

TEST_CASE("total loss") {
  const LossWeights unit;
  CHECK(total_loss({}, unit, Phase::kGenerator).total == 0.0);
  const LossTerms<double> ones{1, 1, 1, 1, 1, 1};
  CHECK(total_loss(ones, unit, Phase::kGenerator).total == 5.0);
  CHECK(total_loss(ones, unit, Phase::kDiscriminator).total == 1.0);
  LossWeights no_adv;
  no_adv.lambda5 = 0.0;
  LossTerms<double> t1{0.3, 0.2, 0.1, 0.4, 17.0, -9.0}, t2 = t1;
  t2.adv_d = -123.0;
  t2.adv_g = 55.0;
  CHECK(total_loss(t1, no_adv, Phase::kGenerator).total == total_loss(t2, no_adv, Phase::kGenerator).total);
  LossWeights negative;
  negative.lambda3 = -0.1;
  CHECK_THROWS_AS(total_loss(ones, negative, Phase::kGenerator), ConfigError);
  CHECK(LossWeights::from_json(unit.to_json()) == unit);
  const auto tensor_total =
      weighted_total(LossTerms<torch::Tensor>{torch::tensor(1.0), torch::tensor(2.0), torch::tensor(3.0),
                                              torch::tensor(4.0), torch::tensor(5.0), torch::tensor(6.0)},
                     unit, Phase::kGenerator);
  CHECK(tensor_total.item<double>() == 16.0);
}

TEST_CASE("analytic gradients match central differences") {
  torch::manual_seed(5);
  const auto mask = (torch::rand({1, 1, 4, 4}, kF64) > 0.3).to(torch::kFloat64);
  const auto gt = torch::rand({1, 3, 4, 4}, kF64);
  const auto light_gt = torch::rand({1, 768}, kF64) * 3;
  const auto light_hat = torch::rand({1, 768}, kF64) * 3;
  const auto relit = offset_from(gt, 6);
  const int points = 20;

  SUBCASE("basic") {
    CHECK(check_gradient([&](const torch::Tensor& x) { return basic_loss(light_gt, light_hat, gt, x, gt, relit, mask).value; },
                         relit, points, 1).max_rel_error < 1e-3);
    CHECK(check_gradient([&](const torch::Tensor& x) { return basic_loss(light_gt, x, gt, relit, gt, relit, mask).value; },
                         light_hat, points, 2).max_rel_error < 1e-3);
  }
  SUBCASE("latent") {
    const auto e = torch::randn({1, 16}, kF64);
    CHECK(check_gradient([&](const torch::Tensor& x) { return latent_loss(e, x); }, torch::randn({1, 16}, kF64), points, 3)
              .max_rel_error < 1e-3);
  }
  SUBCASE("parsing") {
    const auto p = torch::rand({1, 3, 4, 4}, kF64);
    const auto hat = 0.05 + 0.9 * torch::rand({1, 3, 4, 4}, kF64);
    CHECK(check_gradient([&](const torch::Tensor& x) { return parsing_loss(p, x); }, hat, points, 4).max_rel_error < 1e-3);
  }
  SUBCASE("adversarial") {
    torch::manual_seed(7);
    auto cfg = tiny_config();
    Discriminator disc(cfg);
    disc->to(torch::kFloat64);
    const Critic critic = [&](const torch::Tensor& s, const torch::Tensor& r, const torch::Tensor& l) { return disc(s, r, l); };
    const auto src = torch::rand({1, 3, 8, 8}, kF64), real = torch::rand({1, 3, 8, 8}, kF64);
    const auto fake = torch::rand({1, 3, 8, 8}, kF64), light = torch::rand({1, 768}, kF64);
    CHECK(check_gradient([&](const torch::Tensor& x) { return adversarial_losses(critic, src, x, real, light).adv_d; }, fake,
                         points, 5).max_rel_error < 1e-3);
    CHECK(check_gradient([&](const torch::Tensor& x) { return adversarial_losses(critic, src, x, real, light).adv_g; }, fake,
                         points, 6).max_rel_error < 1e-3);
  }
  SUBCASE("temporal") {
    const auto fwd = torch::randn({1, 2, 4, 4}, kF64) * 0.7;
    const auto bwd = torch::randn({1, 2, 4, 4}, kF64) * 0.7;
    const auto other = offset_from(relit, 8);
    CHECK(check_gradient([&](const torch::Tensor& x) { return temporal_loss(x, other, x, other, other, x, fwd, bwd); },
                         relit, points, 7).max_rel_error < 1e-3);
  }
  SUBCASE("total") {
    CHECK(check_gradient(
              [&](const torch::Tensor& x) {
                LossTerms<torch::Tensor> terms{x[0], x[1], x[2], x[3], x[4], x[5]};
                LossWeights w{0.5, 1.5, 2.0, 0.25, 3.0};
                return weighted_total(terms, w, Phase::kGenerator) * x.sum();
              },
              torch::rand({6}, kF64), points, 8)
              .max_rel_error < 1e-3);
  }
}

TEST_CASE("basic loss reaches every network parameter") {
  torch::manual_seed(9);
  const auto cfg = tiny_config();
  RelightNet net(cfg);
  const auto input = torch::rand({2, 3, 8, 8});
  const auto light_gt = torch::rand({2, 768});
  const auto target_light = torch::rand({2, 768});
  const auto mask = torch::ones({2, 1, 8, 8});
  auto enc = net->encode(input);
  const auto self = net->decode(enc.light_pred, enc.skips, enc.structure);
  const auto target = net->decode(target_light, enc.skips, enc.structure);
  const auto loss = basic_loss(light_gt, enc.light_pred, torch::rand({2, 3, 8, 8}), target.image, input, self.image, mask);
  loss.value.backward();
  for (const auto& item : net->named_parameters()) {
    // The parsing head is supervised by the parsing loss only.
    if (item.key().find("parsing_head") != std::string::npos) continue;
    INFO(item.key());
    REQUIRE(item.value().grad().defined());
    CHECK(item.value().grad().abs().sum().item<double>() > 0.0);
  }
  net->zero_grad();
  parsing_loss(torch::rand({2, 3, 8, 8}), net->reconstruct(input).parsing).backward();
  for (const auto& item : net->decoder->named_parameters()) {
    if (item.key().find("parsing_head") == std::string::npos) continue;
    CHECK(item.value().grad().abs().sum().item<double>() > 0.0);
  }
}
