#include "torch_doctest.hpp"

#include <cmath>
#include <random>

#include "relight/errors.hpp"
#include "relight/lighting.hpp"
#include "relight/model.hpp"

using namespace relight;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.height = 16;
  c.width = 16;
  c.depth = 3;
  c.widths = {4, 6, 8};
  c.structure_dim = 8;
  c.light_embedding = 8;
  c.light_head_channels = 2;
  c.disc_width = 4;
  return c;
}

int64_t conv_params(int64_t in, int64_t out, int64_t k) { return in * out * k * k + out; }
int64_t linear_params(int64_t in, int64_t out) { return in * out + out; }

// Parameter count written out from the layer table, independently of the module code.
int64_t expected_net_params(const ModelConfig& c) {
  const int64_t bottleneck = c.bottleneck_height() * c.bottleneck_width();
  const int64_t last = c.widths.back();
  int64_t n = 0;
  for (int l = 0; l < c.depth; ++l) {
    n += conv_params(l == 0 ? 3 : c.widths[l - 1], c.widths[l], 3) + conv_params(c.widths[l], c.widths[l], 3);
  }
  n += conv_params(last, c.light_head_channels, 1);
  n += linear_params(c.light_head_channels * bottleneck, 768);
  n += linear_params(last, c.structure_dim);
  n += linear_params(768, c.light_embedding);
  n += linear_params(c.light_embedding + c.structure_dim, last * bottleneck);
  n += conv_params(2 * last, last, 3) + conv_params(last, last, 3);
  for (int l = c.depth - 2; l >= 0; --l) {
    n += conv_params(c.widths[l + 1] + c.widths[l], c.widths[l], 3) + conv_params(c.widths[l], c.widths[l], 3);
  }
  const int64_t code = c.light_embedding + c.structure_dim;
  n += linear_params(code, 2 * last);
  for (int l = c.depth - 2; l >= 0; --l) n += linear_params(code, 2 * c.widths[l]);
  n += conv_params(c.widths[0], 3, 3) + conv_params(c.widths[0], c.semantic_classes, 3);
  return n;
}

torch::Tensor random_lights(int64_t n, double scale = 1.0) { return torch::rand({n, 768}) * scale; }

}  // namespace

TEST_CASE("model config validation and json round trip") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  auto bad = c;
  bad.widths.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.height = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.structure_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder output shapes and ranges") {
  torch::manual_seed(0);
  ModelConfig c;
  RelightNet net(c);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto enc = net->encode(torch::rand({2, 3, 64, 64}));
  CHECK(enc.light_pred.sizes() == torch::IntArrayRef({2, 768}));
  CHECK(enc.light_pred.min().item<float>() >= 0.0f);
  CHECK(enc.structure.sizes() == torch::IntArrayRef({2, 128}));
  REQUIRE(enc.skips.levels.size() == 5);
  for (int l = 0; l < 5; ++l) {
    CHECK(enc.skips.levels[l].size(1) == c.widths[l]);
    CHECK(enc.skips.levels[l].size(2) == (64 >> l));
    CHECK(enc.skips.levels[l].size(3) == (64 >> l));
  }
  const auto dec = net->decode(enc.light_pred, enc.skips, enc.structure);
  CHECK(dec.image.sizes() == torch::IntArrayRef({2, 3, 64, 64}));
  CHECK(dec.parsing.sizes() == torch::IntArrayRef({2, 3, 64, 64}));
  CHECK(dec.image.min().item<float>() >= 0.0f);
  CHECK(dec.image.max().item<float>() <= 1.0f);
  CHECK(dec.parsing.min().item<float>() > 0.0f);
  CHECK(dec.parsing.max().item<float>() < 1.0f);
}

TEST_CASE("inference is deterministic and batch independent") {
  torch::manual_seed(1);
  RelightNet net(ModelConfig{});
  net->eval();
  torch::NoGradGuard no_grad;
  const auto images = torch::rand({3, 3, 64, 64});
  const auto lights = random_lights(3, 5.0);
  const auto a = net->relight(images, lights);
  const auto b = net->relight(images, lights);
  CHECK(torch::equal(a.image, b.image));
  CHECK(torch::equal(a.source_light, b.source_light));
  CHECK(torch::equal(a.parsing, b.parsing));
  for (int64_t i = 0; i < 3; ++i) {
    const auto single = net->relight(images.slice(0, i, i + 1), lights.slice(0, i, i + 1));
    CHECK(torch::allclose(single.image, a.image.slice(0, i, i + 1), 1e-5, 1e-6));
    CHECK(torch::allclose(single.source_light, a.source_light.slice(0, i, i + 1), 1e-5, 1e-6));
    CHECK(torch::allclose(single.parsing, a.parsing.slice(0, i, i + 1), 1e-5, 1e-6));
  }
}

TEST_CASE("relighting with the predicted light equals reconstruction") {
  torch::manual_seed(2);
  RelightNet net(ModelConfig{});
  net->eval();
  torch::NoGradGuard no_grad;
  const auto images = torch::rand({2, 3, 64, 64});
  const auto rec = net->reconstruct(images);
  const auto rel = net->relight(images, net->encode(images).light_pred);
  CHECK(torch::equal(rec.image, rel.image));
  CHECK(torch::equal(rec.parsing, rel.parsing));
  CHECK(rel.image.sizes() == images.sizes());
}

TEST_CASE("forward passes stay finite over the input range") {
  torch::manual_seed(3);
  RelightNet net(ModelConfig{});
  Discriminator disc(ModelConfig{});
  torch::NoGradGuard no_grad;
  for (double scale : {0.0, 1.0, 10.0}) {
    const auto images = torch::rand({2, 3, 64, 64});
    const auto lights = random_lights(2, scale);
    const auto out = net->relight(images, lights);
    CHECK(torch::isfinite(out.image).all().item<bool>());
    CHECK(torch::isfinite(out.source_light).all().item<bool>());
    CHECK(torch::isfinite(out.parsing).all().item<bool>());
    CHECK(torch::isfinite(disc(images, out.image, lights)).all().item<bool>());
  }
  const auto extremes = torch::cat({torch::zeros({1, 3, 64, 64}), torch::ones({1, 3, 64, 64})});
  CHECK(torch::isfinite(net->relight(extremes, torch::full({2, 768}, 10.0)).image).all().item<bool>());
}

TEST_CASE("shape errors") {
  torch::manual_seed(4);
  RelightNet net(small_config());
  Discriminator disc(small_config());
  torch::NoGradGuard no_grad;
  CHECK_THROWS_AS(net->encode(torch::rand({1, 3, 32, 16})), ShapeError);
  CHECK_THROWS_AS(net->encode(torch::rand({1, 4, 16, 16})), ShapeError);
  CHECK_THROWS_AS(net->encode(torch::rand({3, 16, 16})), ShapeError);
  CHECK_THROWS_AS(net->relight(torch::rand({1, 3, 16, 16}), torch::rand({1, 767})), ShapeError);
  const auto enc = net->encode(torch::rand({2, 3, 16, 16}));
  CHECK_THROWS_AS(net->decode(torch::rand({3, 768}), enc.skips, enc.structure), ShapeError);
  CHECK_THROWS_AS(net->decode(enc.light_pred, enc.skips, torch::rand({2, 9})), ShapeError);
  SkipFeatures short_skips{{enc.skips.levels[0]}};
  CHECK_THROWS_AS(net->decode(enc.light_pred, short_skips, enc.structure), ShapeError);
  CHECK_THROWS_AS(disc(torch::rand({2, 3, 16, 16}), torch::rand({1, 3, 16, 16}), torch::rand({2, 768})), ShapeError);
}

TEST_CASE("relight gradient matches central differences") {
  torch::manual_seed(5);
  RelightNet net(small_config());
  net->to(torch::kFloat64);
  const auto image = torch::rand({1, 3, 16, 16}, torch::kFloat64);
  const auto light = torch::rand({1, 768}, torch::kFloat64) * 2.0;
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> pixel(0, 3 * 16 * 16 - 1), texel(0, 767);
  const double eps = 1e-3;
  for (int trial = 0; trial < 20; ++trial) {
    const int p = pixel(rng), k = texel(rng);
    auto l = light.clone().requires_grad_(true);
    net->relight(image, l).image.flatten()[p].backward();
    const double analytic = l.grad()[0][k].item<double>();
    torch::NoGradGuard no_grad;
    auto plus = light.clone(), minus = light.clone();
    plus[0][k] += eps;
    minus[0][k] -= eps;
    const double numeric = (net->relight(image, plus).image.flatten()[p].item<double>() -
                            net->relight(image, minus).image.flatten()[p].item<double>()) /
                           (2 * eps);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-9});
    CHECK(std::abs(analytic - numeric) / scale < 1e-3);
  }
}

TEST_CASE("discriminator scores are unbounded and per sample") {
  torch::manual_seed(6);
  Discriminator disc(ModelConfig{});
  torch::NoGradGuard no_grad;
  for (auto& p : disc->parameters()) p.normal_(0.0, 0.05);
  double lo = 1e30, hi = -1e30;
  torch::Tensor first_scores, first_src, first_rel, first_light;
  for (int chunk = 0; chunk < 10; ++chunk) {
    const auto src = torch::rand({100, 3, 64, 64});
    const auto rel = torch::rand({100, 3, 64, 64});
    const auto light = random_lights(100, 10.0);
    const auto scores = disc(src, rel, light);
    REQUIRE(scores.sizes() == torch::IntArrayRef({100}));
    CHECK(torch::isfinite(scores).all().item<bool>());
    lo = std::min(lo, scores.min().item<double>());
    hi = std::max(hi, scores.max().item<double>());
    if (chunk == 0) {
      first_scores = scores;
      first_src = src;
      first_rel = rel;
      first_light = light;
    }
  }
  CHECK((lo < -1.0 || hi > 1.0));
  // No squashing after the last layer: a bias shift moves every score by the same amount.
  auto params = disc->parameters();
  params.back().add_(7.0);
  const auto shifted = disc(first_src, first_rel, first_light);
  CHECK(torch::allclose(shifted - first_scores, torch::full_like(shifted, 7.0), 0, 1e-4));
  params.back().sub_(7.0);
  const auto perm = torch::randperm(100);
  const auto permuted = disc(first_src.index_select(0, perm), first_rel.index_select(0, perm),
                             first_light.index_select(0, perm));
  CHECK(torch::allclose(permuted, first_scores.index_select(0, perm), 1e-5, 1e-6));
}

TEST_CASE("describe table matches the configured architecture") {
  for (const auto& c : {ModelConfig{}, small_config()}) {
    RelightNet net(c);
    CHECK(parameter_count(*net) == expected_net_params(c));
    const auto rows = describe(*net);
    int64_t sum = 0;
    for (const auto& r : rows) sum += r.count;
    CHECK(sum == expected_net_params(c));
    REQUIRE(rows.size() == static_cast<std::size_t>(2 * (2 * c.depth + 3) + 2 * (3 * c.depth + 4)));
    CHECK(rows.front().name == "encoder.blocks.0.first.weight");
    CHECK(rows.front().shape == std::vector<int64_t>{c.widths[0], 3, 3, 3});
    CHECK(rows.back().name == "decoder.parsing_head.bias");
    CHECK(describe_table(*net).find("total " + std::to_string(expected_net_params(c))) != std::string::npos);
  }
  // Discriminator: 4 strided stages 64 -> 4, then a 4 x 4 valid conv.
  ModelConfig c;
  Discriminator disc(c);
  const int64_t d = c.disc_width;
  const int64_t expected = conv_params(9, d, 4) + conv_params(d, 2 * d, 4) + conv_params(2 * d, 4 * d, 4) +
                           conv_params(4 * d, 8 * d, 4) + conv_params(8 * d, 1, 4);
  CHECK(parameter_count(*disc) == expected);
}
