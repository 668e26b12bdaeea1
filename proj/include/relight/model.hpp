#pragma once

#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace relight {

struct ModelConfig {
  int height = 64;
  int width = 64;
  int depth = 5;                            // encoder/decoder resolution levels
  std::vector<int> widths{16, 24, 32, 48, 64};  // channels per level
  int structure_dim = 128;                  // D_e
  int semantic_classes = 3;
  int light_embedding = 128;
  int light_head_channels = 16;
  int disc_width = 16;
  int version = 1;

  // Throws ConfigError: widths must have `depth` entries and H, W must be
  // divisible by 2^(depth-1) with a bottleneck of at least 2 x 2.
  void validate() const;
  int bottleneck_height() const { return height >> (depth - 1); }
  int bottleneck_width() const { return width >> (depth - 1); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

struct SkipFeatures {
  std::vector<torch::Tensor> levels;  // level l: B x C_l x H/2^l x W/2^l
};

struct EncoderOutput {
  torch::Tensor light_pred;  // B x 768, non-negative (softplus)
  SkipFeatures skips;
  torch::Tensor structure;   // B x D_e
};

struct DecoderOutput {
  torch::Tensor image;    // B x 3 x H x W in [0, 1]
  torch::Tensor parsing;  // B x C_sem x H x W in (0, 1)
};

// Conv 3x3 + ELU, twice; the first may downsample.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d first_{nullptr};
  torch::nn::Conv2d second_{nullptr};
};
TORCH_MODULE(ConvBlock);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);
  EncoderOutput forward(const torch::Tensor& image);

 private:
  ModelConfig config_;
  torch::nn::ModuleList blocks_;
  torch::nn::Conv2d light_reduce_{nullptr};
  torch::nn::Linear light_head_{nullptr};
  torch::nn::Linear structure_head_{nullptr};
};
TORCH_MODULE(Encoder);

// The light enters at the bottleneck: log(1 + L) is projected and
// concatenated with the structure code, then expanded to the bottleneck grid.
// The same code modulates every decoder level with a per-channel scale and
// shift, x * (1 + gamma) + beta.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& config);
  DecoderOutput forward(const torch::Tensor& light, const SkipFeatures& skips, const torch::Tensor& structure);

 private:
  ModelConfig config_;
  torch::nn::Linear light_embed_{nullptr};
  torch::nn::Linear seed_{nullptr};
  torch::nn::ModuleList blocks_;
  torch::nn::ModuleList film_;
  torch::nn::Conv2d image_head_{nullptr};
  torch::nn::Conv2d parsing_head_{nullptr};
};
TORCH_MODULE(Decoder);

struct RelightOutput {
  torch::Tensor image;         // relit under the target light
  torch::Tensor source_light;  // predicted light of the input
  torch::Tensor parsing;
};

class RelightNetImpl : public torch::nn::Module {
 public:
  explicit RelightNetImpl(const ModelConfig& config);

  EncoderOutput encode(const torch::Tensor& image);
  DecoderOutput decode(const torch::Tensor& light, const SkipFeatures& skips, const torch::Tensor& structure);
  // encode, then decode with the light replaced by target_light.
  RelightOutput relight(const torch::Tensor& image, const torch::Tensor& target_light);
  // encode, then decode with the encoder's own light prediction.
  RelightOutput reconstruct(const torch::Tensor& image);

  const ModelConfig& config() const { return config_; }
  Encoder encoder{nullptr};
  Decoder decoder{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(RelightNet);

// DCGAN-style critic over (source, relit, light). The light map is
// bilinearly resized to H x W and stacked with the two images (9 channels).
// The final layer has no activation.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& config);
  // Returns one unbounded score per batch item.
  torch::Tensor forward(const torch::Tensor& source, const torch::Tensor& relit, const torch::Tensor& light);

 private:
  ModelConfig config_;
  torch::nn::Sequential trunk_{nullptr};
};
TORCH_MODULE(Discriminator);

struct LayerInfo {
  std::string name;
  std::vector<int64_t> shape;
  int64_t count = 0;
};

// Parameter table of a module in registration order.
std::vector<LayerInfo> describe(const torch::nn::Module& module);
int64_t parameter_count(const torch::nn::Module& module);
std::string describe_table(const torch::nn::Module& module);

// Throws ShapeError when an image batch does not match the configured size.
void check_image_batch(const torch::Tensor& images, const ModelConfig& config, const char* what);
void check_light_batch(const torch::Tensor& lights, const char* what);

}  // namespace relight
