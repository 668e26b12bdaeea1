#include "relight/model.hpp"

#include <sstream>

#include "relight/errors.hpp"
#include "relight/lighting.hpp"
#include "relight/tensor_image.hpp"

namespace relight {

namespace F = torch::nn::functional;

void ModelConfig::validate() const {
  if (depth < 1 || static_cast<int>(widths.size()) != depth) throw ConfigError("model: widths must have depth entries");
  for (int w : widths)
    if (w <= 0) throw ConfigError("model: widths must be positive");
  const int factor = 1 << (depth - 1);
  if (height % factor != 0 || width % factor != 0 || height / factor < 2 || width / factor < 2) {
    throw ConfigError("model: height and width must be divisible by 2^(depth-1) with a bottleneck >= 2");
  }
  if (structure_dim <= 0 || semantic_classes <= 0 || light_embedding <= 0 || light_head_channels <= 0 ||
      disc_width <= 0) {
    throw ConfigError("model: sizes must be positive");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"height", height},
          {"width", width},
          {"depth", depth},
          {"widths", widths},
          {"structure_dim", structure_dim},
          {"semantic_classes", semantic_classes},
          {"light_embedding", light_embedding},
          {"light_head_channels", light_head_channels},
          {"disc_width", disc_width},
          {"version", version}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.depth = j.value("depth", c.depth);
  c.widths = j.value("widths", c.widths);
  c.structure_dim = j.value("structure_dim", c.structure_dim);
  c.semantic_classes = j.value("semantic_classes", c.semantic_classes);
  c.light_embedding = j.value("light_embedding", c.light_embedding);
  c.light_head_channels = j.value("light_head_channels", c.light_head_channels);
  c.disc_width = j.value("disc_width", c.disc_width);
  c.version = j.value("version", c.version);
  c.validate();
  return c;
}

void check_image_batch(const torch::Tensor& images, const ModelConfig& config, const char* what) {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != config.height || images.size(3) != config.width) {
    std::ostringstream msg;
    msg << what << ": expected B x 3 x " << config.height << " x " << config.width << ", got " << images.sizes();
    throw ShapeError(msg.str());
  }
}

void check_light_batch(const torch::Tensor& lights, const char* what) {
  if (lights.dim() != 2 || lights.size(1) != kLightSize) {
    std::ostringstream msg;
    msg << what << ": expected B x 768 light batch, got " << lights.sizes();
    throw ShapeError(msg.str());
  }
}

ConvBlockImpl::ConvBlockImpl(int in_channels, int out_channels, int stride)
    : first_(register_module("first", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3)
                                                             .stride(stride)
                                                             .padding(1)))),
      second_(register_module("second",
                              torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)))) {}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return F::elu(second_(F::elu(first_(x)))); }

EncoderImpl::EncoderImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int level = 0; level < config_.depth; ++level) {
    const int in = level == 0 ? 3 : config_.widths[level - 1];
    blocks_->push_back(ConvBlock(in, config_.widths[level], level == 0 ? 1 : 2));
  }
  const int last = config_.widths.back();
  const int flat = config_.light_head_channels * config_.bottleneck_height() * config_.bottleneck_width();
  light_reduce_ = register_module("light_reduce", torch::nn::Conv2d(torch::nn::Conv2dOptions(last, config_.light_head_channels, 1)));
  light_head_ = register_module("light_head", torch::nn::Linear(flat, kLightSize));
  structure_head_ = register_module("structure_head", torch::nn::Linear(last, config_.structure_dim));
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& image) {
  check_image_batch(image, config_, "encode");
  EncoderOutput out;
  torch::Tensor x = image;
  for (const auto& block : *blocks_) {
    x = block->as<ConvBlock>()->forward(x);
    out.skips.levels.push_back(x);
  }
  const auto light_features = F::elu(light_reduce_(x)).flatten(1);
  out.light_pred = F::softplus(light_head_(light_features));
  // Global pooling gives the structure code a whole-image receptive field.
  out.structure = structure_head_(x.mean({2, 3}));
  return out;
}

DecoderImpl::DecoderImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int last = config_.widths.back();
  light_embed_ = register_module("light_embed", torch::nn::Linear(kLightSize, config_.light_embedding));
  seed_ = register_module("seed", torch::nn::Linear(config_.light_embedding + config_.structure_dim,
                                                    last * config_.bottleneck_height() * config_.bottleneck_width()));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  blocks_->push_back(ConvBlock(2 * last, last, 1));
  for (int level = config_.depth - 2; level >= 0; --level) {
    blocks_->push_back(ConvBlock(config_.widths[level + 1] + config_.widths[level], config_.widths[level], 1));
  }
  film_ = register_module("film", torch::nn::ModuleList());
  const int code = config_.light_embedding + config_.structure_dim;
  film_->push_back(torch::nn::Linear(code, 2 * last));
  for (int level = config_.depth - 2; level >= 0; --level) film_->push_back(torch::nn::Linear(code, 2 * config_.widths[level]));
  // Identity modulation at initialisation.
  torch::NoGradGuard no_grad;
  for (const auto& film : *film_) {
    for (auto& p : film->parameters()) p.zero_();
  }
  image_head_ = register_module("image_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(config_.widths[0], 3, 3).padding(1)));
  parsing_head_ = register_module(
      "parsing_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(config_.widths[0], config_.semantic_classes, 3).padding(1)));
}

DecoderOutput DecoderImpl::forward(const torch::Tensor& light, const SkipFeatures& skips, const torch::Tensor& structure) {
  check_light_batch(light, "decode");
  if (static_cast<int>(skips.levels.size()) != config_.depth) throw ShapeError("decode: skip level count != depth");
  if (structure.dim() != 2 || structure.size(1) != config_.structure_dim) throw ShapeError("decode: structure code size");
  const auto batch = light.size(0);
  if (structure.size(0) != batch || skips.levels.front().size(0) != batch) throw ShapeError("decode: batch sizes differ");

  const auto code = torch::cat({F::elu(light_embed_(torch::log1p(light))), structure}, 1);
  const auto modulate = [&](const torch::Tensor& features, int b) {
    const auto params = film_[b]->as<torch::nn::Linear>()->forward(code).unsqueeze(-1).unsqueeze(-1);
    const auto halves = params.chunk(2, 1);
    return features * (1 + halves[0]) + halves[1];
  };
  auto x = F::elu(seed_(code)).reshape({batch, config_.widths.back(), config_.bottleneck_height(), config_.bottleneck_width()});
  x = modulate(blocks_[0]->as<ConvBlock>()->forward(torch::cat({x, skips.levels.back()}, 1)), 0);
  for (int level = config_.depth - 2, b = 1; level >= 0; --level, ++b) {
    const auto& skip = skips.levels[level];
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{skip.size(2), skip.size(3)})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    x = modulate(blocks_[b]->as<ConvBlock>()->forward(torch::cat({x, skip}, 1)), b);
  }
  return {torch::sigmoid(image_head_(x)), torch::sigmoid(parsing_head_(x))};
}

RelightNetImpl::RelightNetImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  encoder = register_module("encoder", Encoder(config_));
  decoder = register_module("decoder", Decoder(config_));
}

EncoderOutput RelightNetImpl::encode(const torch::Tensor& image) { return encoder(image); }

DecoderOutput RelightNetImpl::decode(const torch::Tensor& light, const SkipFeatures& skips,
                                     const torch::Tensor& structure) {
  return decoder(light, skips, structure);
}

RelightOutput RelightNetImpl::relight(const torch::Tensor& image, const torch::Tensor& target_light) {
  check_light_batch(target_light, "relight");
  auto enc = encode(image);
  auto dec = decode(target_light, enc.skips, enc.structure);
  return {dec.image, enc.light_pred, dec.parsing};
}

RelightOutput RelightNetImpl::reconstruct(const torch::Tensor& image) {
  auto enc = encode(image);
  auto dec = decode(enc.light_pred, enc.skips, enc.structure);
  return {dec.image, enc.light_pred, dec.parsing};
}

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  trunk_ = torch::nn::Sequential();
  int channels = 9, next = config_.disc_width;
  int64_t h = config_.height, w = config_.width;
  while (std::min(h, w) > 4) {
    trunk_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, next, 4).stride(2).padding(1)));
    trunk_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    channels = next;
    next *= 2;
    h /= 2;
    w /= 2;
  }
  trunk_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 1, {h, w})));
  register_module("trunk", trunk_);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& source, const torch::Tensor& relit,
                                         const torch::Tensor& light) {
  check_image_batch(source, config_, "discriminate(source)");
  check_image_batch(relit, config_, "discriminate(relit)");
  check_light_batch(light, "discriminate");
  if (source.size(0) != relit.size(0) || source.size(0) != light.size(0)) throw ShapeError("discriminate: batch sizes differ");
  const auto planes = F::interpolate(light_planes(light), F::InterpolateFuncOptions()
                                                               .size(std::vector<int64_t>{config_.height, config_.width})
                                                               .mode(torch::kBilinear)
                                                               .align_corners(false));
  return trunk_->forward(torch::cat({source, relit, planes}, 1)).flatten();
}

std::vector<LayerInfo> describe(const torch::nn::Module& module) {
  std::vector<LayerInfo> rows;
  for (const auto& item : module.named_parameters(true)) {
    rows.push_back({item.key(), item.value().sizes().vec(), item.value().numel()});
  }
  return rows;
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters(true)) total += p.numel();
  return total;
}

std::string describe_table(const torch::nn::Module& module) {
  std::ostringstream out;
  for (const auto& row : describe(module)) {
    out << row.name << " [";
    for (std::size_t i = 0; i < row.shape.size(); ++i) out << (i ? "x" : "") << row.shape[i];
    out << "] " << row.count << '\n';
  }
  out << "total " << parameter_count(module) << '\n';
  return out.str();
}

}  // namespace relight
