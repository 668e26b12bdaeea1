#include "relight/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "relight/binary_io.hpp"
#include "relight/errors.hpp"

namespace relight {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

constexpr char kMagic[8] = {'R', 'L', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open checkpoint");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void collect(const torch::nn::Module& module, const std::string& prefix,
             std::vector<std::pair<std::string, torch::Tensor>>& out) {
  for (const auto& item : module.named_parameters(true)) out.emplace_back(prefix + item.key(), item.value());
  for (const auto& item : module.named_buffers(true)) out.emplace_back(prefix + item.key(), item.value());
}

struct Parsed {
  nlohmann::json header;
  std::size_t payload_offset = 0;
};

Parsed parse(const std::vector<char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError(path.string() + ": not a relight checkpoint (bad magic)");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) throw CheckpointError(path.string() + ": truncated header");
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": corrupt header: " + e.what());
  }
  if (p.header.value("format_version", 0) != kFormatVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint format version");
  }
  p.payload_offset = 16 + header_len;
  return p;
}

CheckpointInfo info_from(const nlohmann::json& header, std::span<const char> bytes, const std::filesystem::path& path) {
  CheckpointInfo info;
  try {
    info.model = ModelConfig::from_json(header.at("model"));
    info.step = header.at("step").get<std::int64_t>();
    info.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": incomplete header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": incompatible model config: " + e.what());
  }
  info.id = fnv1a_hex(bytes);
  return info;
}

}  // namespace

std::string fnv1a_hex(std::span<const char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

void save_checkpoint(const std::filesystem::path& path, RelightNet& net, Discriminator* disc, std::int64_t step,
                     const nlohmann::json& metadata) {
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  collect(*net, "generator.", tensors);
  if (disc != nullptr && !disc->is_empty()) collect(**disc, "discriminator.", tensors);

  nlohmann::json table = nlohmann::json::array();
  std::vector<torch::Tensor> payload;
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : tensors) {
    auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    table.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.numel());
    payload.push_back(t);
  }
  const nlohmann::json header = {{"format_version", kFormatVersion},
                                 {"model", net->config().to_json()},
                                 {"step", step},
                                 {"metadata", metadata},
                                 {"has_discriminator", disc != nullptr && !disc->is_empty()},
                                 {"tensors", table}};
  const std::string header_text = header.dump();
  std::vector<char> bytes(kMagic, kMagic + 8);
  const std::uint64_t len = header_text.size();
  bytes.insert(bytes.end(), reinterpret_cast<const char*>(&len), reinterpret_cast<const char*>(&len) + 8);
  bytes.insert(bytes.end(), header_text.begin(), header_text.end());
  for (const auto& t : payload) {
    const auto* p = reinterpret_cast<const char*>(t.data_ptr<float>());
    bytes.insert(bytes.end(), p, p + t.numel() * sizeof(float));
  }
  write_file_atomic(path, bytes);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return info_from(parse(bytes, path).header, bytes, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, bool with_discriminator) {
  const auto bytes = read_all(path);
  const auto parsed = parse(bytes, path);
  LoadedCheckpoint out;
  out.info = info_from(parsed.header, bytes, path);
  out.net = RelightNet(out.info.model);
  const bool has_disc = parsed.header.value("has_discriminator", false);
  if (with_discriminator && has_disc) out.disc = Discriminator(out.info.model);

  std::vector<std::pair<std::string, torch::Tensor>> targets;
  collect(*out.net, "generator.", targets);
  if (!out.disc.is_empty()) collect(*out.disc, "discriminator.", targets);

  std::map<std::string, nlohmann::json> table;
  for (const auto& entry : parsed.header.at("tensors")) table[entry.at("name").get<std::string>()] = entry;
  const std::size_t payload_floats = (bytes.size() - parsed.payload_offset) / sizeof(float);
  torch::NoGradGuard no_grad;
  for (auto& [name, tensor] : targets) {
    const auto it = table.find(name);
    if (it == table.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
    const auto shape = it->second.at("shape").get<std::vector<int64_t>>();
    if (shape != tensor.sizes().vec()) throw CheckpointError(path.string() + ": shape mismatch for " + name);
    const auto offset = it->second.at("offset").get<std::uint64_t>();
    if (offset + static_cast<std::uint64_t>(tensor.numel()) > payload_floats) {
      throw CheckpointError(path.string() + ": truncated payload at " + name);
    }
    std::vector<float> values(static_cast<std::size_t>(tensor.numel()));
    std::memcpy(values.data(), bytes.data() + parsed.payload_offset + offset * sizeof(float),
                values.size() * sizeof(float));
    tensor.copy_(torch::from_blob(values.data(), shape, torch::kFloat32));
  }
  out.net->eval();
  if (!out.disc.is_empty()) out.disc->eval();
  return out;
}

}  // namespace relight
