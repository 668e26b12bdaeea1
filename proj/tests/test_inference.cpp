#include "torch_doctest.hpp"

#include <filesystem>
#include <thread>

#include "relight/errors.hpp"
#include "relight/inference.hpp"
#include "relight/tensor_image.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.height = 32;
  c.width = 32;
  c.depth = 3;
  c.widths = {4, 6, 8};
  c.structure_dim = 8;
  c.light_embedding = 8;
  c.light_head_channels = 2;
  c.disc_width = 4;
  return c;
}

Image random_image(int seed) {
  Image img(32, 32, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>((i * 7919 + seed * 31) % 255) / 255.0f;
  return img;
}

}  // namespace

TEST_CASE("relighter matches the network and the checkpoint") {
  const auto path = fs::temp_directory_path() / ("relight_inference_" + std::to_string(::getpid()) + ".ckpt");
  torch::manual_seed(4);
  RelightNet net(small_model());
  save_checkpoint(path, net, nullptr, 7);
  const auto relighter = Relighter::from_checkpoint(path);
  CHECK(relighter.info().step == 7);
  CHECK(relighter.config() == small_model());

  const auto img = random_image(1);
  const auto light = preset_maps()[2];
  const auto out = relighter.relight(img, light);
  net->eval();
  torch::NoGradGuard no_grad;
  const auto direct = net->relight(to_tensor(img).unsqueeze(0), to_tensor(light).unsqueeze(0));
  CHECK(out.image == to_image(direct.image[0]));
  CHECK(out.source_light == to_light_map(direct.source_light[0]));
  CHECK(out.parsing.channels == 3);

  // Relighting to the predicted source light is the reconstruction path.
  const auto rec = relighter.reconstruct(img);
  CHECK(relighter.relight(img, rec.source_light).image == rec.image);

  const auto fn = relighter.as_fn();
  CHECK(fn(RelightQuery{img, light}) == out.image);

  CHECK_THROWS_AS(relighter.relight(Image(16, 16, 3), light), ShapeError);
  CHECK_THROWS_AS(relighter.relight(Image(32, 32, 1), light), ShapeError);
  fs::remove(path);
}

TEST_CASE("concurrent inference is deterministic") {
  torch::manual_seed(5);
  const Relighter relighter{RelightNet(small_model())};
  const auto img = random_image(2);
  const auto light = preset_maps()[0];
  const auto reference = relighter.relight(img, light).image;
  std::vector<int> mismatches(8, 0);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        if (!(relighter.relight(img, light).image == reference)) ++mismatches[t];
      }
    });
  }
  for (auto& th : threads) th.join();
  for (int m : mismatches) CHECK(m == 0);
}

TEST_CASE("image and flow tensors own their storage") {
  for (int channels : {1, 3}) {
    Image img(4, 5, channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
    const auto t = to_tensor(img);
    CHECK(t.data_ptr<float>() != img.data.data());
    img.data.assign(img.data.size(), -1.0f);
    CHECK(t.min().item<float>() == 0.0f);
    CHECK(t.size(0) == channels);
  }
  FlowField flow(1, 1);
  flow.vectors = {0.5f, -0.5f};
  const auto f = to_tensor(flow);
  CHECK(f.data_ptr<float>() != flow.vectors.data());
}
