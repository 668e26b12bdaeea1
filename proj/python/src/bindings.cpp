#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "relight/dataset.hpp"
#include "relight/errors.hpp"
#include "relight/evaluation.hpp"
#include "relight/inference.hpp"
#include "relight/metrics.hpp"
#include "relight/png_io.hpp"

namespace py = pybind11;
using namespace relight;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected an H x W or H x W x C array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(h, w, c);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

FloatArray from_image(const Image& img) {
  FloatArray out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

LightMap to_light(const FloatArray& a) {
  if (a.size() != kLightSize) throw ShapeError("light must have 768 entries (16 x 16 x 3), got " + std::to_string(a.size()));
  return LightMap::from_values(std::span<const float>(a.data(), static_cast<std::size_t>(a.size())));
}

FloatArray from_light(const LightMap& map) {
  FloatArray out({kLightRows, kLightCols, kLightChannels});
  std::copy(map.values().begin(), map.values().end(), out.mutable_data());
  return out;
}

py::dict metrics_dict(const MaskedMetrics& m) {
  py::dict d;
  d["rmse"] = m.rmse;
  d["psnr"] = m.psnr;
  d["ssim"] = m.ssim;
  return d;
}

py::dict result_dict(const RelightResult& r) {
  py::dict d;
  d["image"] = from_image(r.image);
  d["source_light"] = from_light(r.source_light);
  d["parsing"] = from_image(r.parsing);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural video portrait relighting core.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());

  m.def("preset_names", [] {
    std::vector<std::string> names;
    for (const auto& p : preset_library()) names.push_back(p.name);
    return names;
  });
  m.def("preset", [](const std::string& name) {
    for (const auto& p : preset_library())
      if (p.name == name) return from_light(p.map);
    throw ConfigError("unknown preset " + name);
  }, py::arg("name"), "16 x 16 x 3 radiance of a library preset.");
  m.def("rotate_light", [](const FloatArray& light, int columns) { return from_light(rotate_light(to_light(light), columns)); },
        py::arg("light"), py::arg("columns"));
  m.def("project_point_light",
        [](std::array<double, 3> direction, float distance, std::array<float, 3> color) {
          PointLight p{normalize(Vec3{direction[0], direction[1], direction[2]}), distance, color};
          return from_light(project_point_lights(std::vector<PointLight>{p}));
        },
        py::arg("direction"), py::arg("distance") = 1.0f, py::arg("color") = std::array<float, 3>{1.0f, 1.0f, 1.0f});
  m.def("log_light_distance", [](const FloatArray& a, const FloatArray& b) {
    return log_light_distance(to_light(a), to_light(b));
  });

  py::class_<OlatSequence>(m, "Sequence")
      .def_static("render", [](int identity, int take, int frames, std::uint64_t seed, int size, int lights) {
        return render_sequence(make_scene(identity, take, frames, seed, size, size, lights));
      }, py::arg("identity"), py::arg("take"), py::arg("frames"), py::arg("seed"), py::arg("size") = 64, py::arg("lights") = 16)
      .def_static("read", [](const std::filesystem::path& dir) { return read_sequence(dir); })
      .def("write", [](const OlatSequence& s, const std::filesystem::path& root) { return write_sequence(s, root); })
      .def_property_readonly("num_frames", [](const OlatSequence& s) { return s.frames.size(); })
      .def_property_readonly("num_lights", &OlatSequence::num_lights)
      .def_property_readonly("size", [](const OlatSequence& s) { return std::pair{s.height(), s.width()}; })
      .def_property_readonly("identity", [](const OlatSequence& s) { return s.identity_id; })
      .def_property_readonly("take", [](const OlatSequence& s) { return s.take_id; })
      .def("composite", [](const OlatSequence& s, std::size_t frame, const FloatArray& light, float exposure) {
        return from_image(composite_relit(s.frames.at(frame), s.light_directions, to_light(light), exposure));
      }, py::arg("frame"), py::arg("light"), py::arg("exposure") = 1.0f, "Tone-mapped ground truth under a light.")
      .def("composite_linear", [](const OlatSequence& s, std::size_t frame, const FloatArray& light) {
        return from_image(composite_linear(s.frames.at(frame), s.light_directions, to_light(light)));
      }, py::arg("frame"), py::arg("light"))
      .def("mask", [](const OlatSequence& s, std::size_t frame) { return from_image(s.frames.at(frame).foreground); })
      .def("parsing", [](const OlatSequence& s, std::size_t frame) { return from_image(s.frames.at(frame).parsing); });

  m.def("masked_metrics", [](const FloatArray& pred, const FloatArray& gt, const FloatArray& mask) {
    return metrics_dict(masked_metrics(to_image(pred), to_image(gt), to_image(mask)));
  }, py::arg("pred"), py::arg("gt"), py::arg("mask"));
  m.def("psnr_from_rmse", &psnr_from_rmse);

  m.def("read_png", [](const std::filesystem::path& p) { return from_image(read_png(p, 3)); });
  m.def("write_png", [](const std::filesystem::path& p, const FloatArray& img) { write_png(p, to_image(img)); });

  py::class_<Relighter>(m, "Relighter")
      .def_static("from_checkpoint", &Relighter::from_checkpoint, py::arg("path"))
      .def("relight", [](const Relighter& r, const FloatArray& image, const FloatArray& light) {
        const auto in = to_image(image);
        const auto target = to_light(light);
        py::gil_scoped_release release;
        auto out = r.relight(in, target);
        py::gil_scoped_acquire acquire;
        return result_dict(out);
      }, py::arg("image"), py::arg("light"))
      .def("reconstruct", [](const Relighter& r, const FloatArray& image) {
        const auto in = to_image(image);
        py::gil_scoped_release release;
        auto out = r.reconstruct(in);
        py::gil_scoped_acquire acquire;
        return result_dict(out);
      }, py::arg("image"))
      .def_property_readonly("checkpoint_id", [](const Relighter& r) { return r.info().id; })
      .def_property_readonly("step", [](const Relighter& r) { return r.info().step; })
      .def_property_readonly("size", [](const Relighter& r) { return std::pair{r.config().height, r.config().width}; });
}
