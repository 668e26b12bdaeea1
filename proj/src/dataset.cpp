#include "relight/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "relight/binary_io.hpp"
#include "relight/errors.hpp"
#include "relight/png_io.hpp"

namespace relight {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string frame_dir_name(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "frame_%04zu", index);
  return buffer;
}

void write_flow(const fs::path& path, const FlowField& flow) { write_f32(path, flow.vectors); }

FlowField read_flow(const fs::path& path, int h, int w, FlowDirection dir) {
  FlowField flow(h, w, dir);
  flow.vectors = read_f32(path, static_cast<std::size_t>(h) * w * 2);
  return flow;
}

template <class T>
T field(const json& meta, const char* key, const fs::path& path) {
  if (!meta.contains(key)) throw FormatError(path, std::string("missing key \"") + key + "\"");
  try {
    return meta.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path, std::string("bad value for \"") + key + "\": " + e.what());
  }
}

}  // namespace

fs::path write_sequence(const OlatSequence& seq, const fs::path& root) {
  seq.validate();
  const fs::path take_dir = root / seq.identity_id / seq.take_id;
  fs::create_directories(take_dir);
  const int n = seq.num_lights(), h = seq.height(), w = seq.width();

  json directions = json::array();
  for (const auto& d : seq.light_directions) directions.push_back({d.x, d.y, d.z});
  const json meta = {
      {"kind", "olat_take"},
      {"version", kFormatVersion},
      {"identity_id", seq.identity_id},
      {"take_id", seq.take_id},
      {"fps", seq.fps},
      {"seed", seq.seed},
      {"num_frames", seq.frames.size()},
      {"num_lights", n},
      {"height", h},
      {"width", w},
      {"semantic_classes", {"skin", "hair", "background"}},
      {"light_directions", directions},
      {"shapes",
       {{"basis", {n, h, w, 3}}, {"parsing", {h, w, kSemanticClasses}}, {"foreground", {h, w}}, {"flow", {h, w, 2}}}},
  };

  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& frame = seq.frames[i];
    const fs::path dir = take_dir / frame_dir_name(i);
    fs::create_directories(dir);
    write_f32(dir / "basis.f32", frame.basis);
    write_f32(dir / "parsing.f32", frame.parsing.data);
    write_png(dir / "foreground.png", frame.foreground);
    if (frame.flow_to_next) write_flow(dir / "flow.f32", *frame.flow_to_next);
    if (frame.flow_to_prev) write_flow(dir / "flow_prev.f32", *frame.flow_to_prev);
  }
  write_json(take_dir / "meta.json", meta);
  return take_dir;
}

OlatSequence read_sequence(const fs::path& take_dir) {
  const fs::path meta_path = take_dir / "meta.json";
  const json meta = read_json(meta_path);
  if (meta.value("kind", "") != "olat_take") throw FormatError(meta_path, "kind is not \"olat_take\"");
  if (field<int>(meta, "version", meta_path) != kFormatVersion) throw FormatError(meta_path, "unsupported version");

  const int n = field<int>(meta, "num_lights", meta_path);
  const int h = field<int>(meta, "height", meta_path);
  const int w = field<int>(meta, "width", meta_path);
  const auto frame_count = field<std::size_t>(meta, "num_frames", meta_path);
  if (n <= 0 || h <= 0 || w <= 0 || frame_count == 0) throw FormatError(meta_path, "non-positive shape");
  const json expected_shapes = {
      {"basis", {n, h, w, 3}}, {"parsing", {h, w, kSemanticClasses}}, {"foreground", {h, w}}, {"flow", {h, w, 2}}};
  if (meta.value("shapes", json::object()) != expected_shapes) {
    throw FormatError(meta_path, "shapes block contradicts num_lights/height/width");
  }

  OlatSequence seq;
  seq.identity_id = field<std::string>(meta, "identity_id", meta_path);
  seq.take_id = field<std::string>(meta, "take_id", meta_path);
  seq.fps = field<double>(meta, "fps", meta_path);
  seq.seed = field<std::uint64_t>(meta, "seed", meta_path);
  const auto directions = field<std::vector<std::vector<double>>>(meta, "light_directions", meta_path);
  if (static_cast<int>(directions.size()) != n) throw FormatError(meta_path, "light_directions length != num_lights");
  for (const auto& d : directions) {
    if (d.size() != 3) throw FormatError(meta_path, "light direction is not a 3-vector");
    seq.light_directions.push_back({d[0], d[1], d[2]});
  }

  for (std::size_t i = 0; i < frame_count; ++i) {
    const fs::path dir = take_dir / frame_dir_name(i);
    OlatFrame frame;
    frame.num_lights = n;
    frame.height = h;
    frame.width = w;
    frame.basis = read_f32(dir / "basis.f32", static_cast<std::size_t>(n) * h * w * 3);
    frame.parsing = Image(h, w, kSemanticClasses);
    frame.parsing.data = read_f32(dir / "parsing.f32", static_cast<std::size_t>(h) * w * kSemanticClasses);
    frame.foreground = read_png(dir / "foreground.png", 1);
    if (frame.foreground.height != h || frame.foreground.width != w) {
      throw FormatError(dir / "foreground.png", "mask size contradicts meta.json");
    }
    if (i + 1 < frame_count) frame.flow_to_next = read_flow(dir / "flow.f32", h, w, FlowDirection::kBackward);
    if (i > 0) frame.flow_to_prev = read_flow(dir / "flow_prev.f32", h, w, FlowDirection::kForward);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<OlatSequence> read_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw FormatError(root, "dataset root is not a directory");
  std::vector<fs::path> takes;
  for (const auto& identity : fs::directory_iterator(root)) {
    if (!identity.is_directory()) continue;
    for (const auto& take : fs::directory_iterator(identity.path())) {
      if (take.is_directory() && fs::exists(take.path() / "meta.json")) takes.push_back(take.path());
    }
  }
  std::sort(takes.begin(), takes.end());
  if (takes.empty()) throw FormatError(root, "no takes found (expected <identity>/<take>/meta.json)");
  std::vector<OlatSequence> out;
  for (const auto& take : takes) out.push_back(read_sequence(take));
  return out;
}

}  // namespace relight
