#include "torch_doctest.hpp"

#include <filesystem>
#include <fstream>

#include "relight/checkpoint.hpp"
#include "relight/errors.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
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

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("relight_ckpt_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  const auto dir = temp_dir();
  torch::manual_seed(1);
  RelightNet net(small_model());
  Discriminator disc(small_model());
  save_checkpoint(dir / "a.ckpt", net, &disc, 42, {{"note", "x"}});
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

  auto loaded = load_checkpoint(dir / "a.ckpt", true);
  CHECK(loaded.info.step == 42);
  CHECK(loaded.info.model == small_model());
  CHECK(loaded.info.metadata.at("note") == "x");
  CHECK(loaded.info.id.size() == 16);
  REQUIRE_FALSE(loaded.disc.is_empty());
  for (std::size_t i = 0; i < net->parameters().size(); ++i) {
    CHECK(torch::equal(net->parameters()[i], loaded.net->parameters()[i]));
  }
  for (std::size_t i = 0; i < disc->parameters().size(); ++i) {
    CHECK(torch::equal(disc->parameters()[i], loaded.disc->parameters()[i]));
  }
  torch::NoGradGuard no_grad;
  net->eval();
  const auto x = torch::rand({1, 3, 16, 16});
  const auto l = torch::rand({1, 768});
  CHECK(torch::equal(net->relight(x, l).image, loaded.net->relight(x, l).image));

  // Saving the same weights twice gives the same bytes and id.
  save_checkpoint(dir / "b.ckpt", net, &disc, 42, {{"note", "x"}});
  CHECK(read_checkpoint_info(dir / "b.ckpt").id == loaded.info.id);
  CHECK(load_checkpoint(dir / "a.ckpt").disc.is_empty());
  fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = temp_dir();
  torch::manual_seed(2);
  RelightNet net(small_model());
  save_checkpoint(dir / "good.ckpt", net, nullptr, 1);
  std::ifstream in(dir / "good.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    return dir / name;
  };
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(write("magic.ckpt", "NOTACKPT" + bytes.substr(8))), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 100))), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(write("header.ckpt", bytes.substr(0, 40))), CheckpointError);
  std::string garbled = bytes;
  garbled[20] = '#';
  CHECK_THROWS_AS(load_checkpoint(write("garbled.ckpt", garbled)), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint_info(write("empty.ckpt", "")), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex(std::span<const char>()) == "cbf29ce484222325");
  const std::string a = "a";
  CHECK(fnv1a_hex(a) == "af63dc4c8601ec8c");
}
