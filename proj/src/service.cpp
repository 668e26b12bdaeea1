#include "relight/service.hpp"

#include <chrono>
#include <cmath>

#include <httplib.h>

#include "relight/base64.hpp"
#include "relight/errors.hpp"
#include "relight/metrics.hpp"
#include "relight/png_io.hpp"

namespace relight {

namespace {

constexpr const char* kServiceVersion = "0.1.0";

struct RequestError {
  int status;
  std::string message;
};

HttpReply json_reply(const nlohmann::json& body, int status = 200) { return {status, body.dump(), "application/json"}; }

HttpReply error_reply(int status, const std::string& message) { return json_reply({{"error", message}}, status); }

nlohmann::json light_to_json(const LightMap& map) {
  return nlohmann::json(std::vector<float>(map.values().begin(), map.values().end()));
}

std::vector<PointLight> parse_point_lights(const nlohmann::json& list) {
  if (!list.is_array()) throw RequestError{400, "point_lights must be an array"};
  std::vector<PointLight> lights;
  for (const auto& item : list) {
    PointLight p;
    try {
      const auto d = item.at("direction").get<std::vector<double>>();
      if (d.size() != 3) throw RequestError{422, "point light direction must have 3 entries"};
      const Vec3 dir{d[0], d[1], d[2]};
      if (!(norm(dir) > 0.0) || !std::isfinite(norm(dir))) throw RequestError{422, "point light direction must be nonzero"};
      p.direction = normalize(dir);
      p.surface_distance = item.value("distance", p.surface_distance);
      if (item.contains("color")) {
        const auto c = item.at("color").get<std::vector<float>>();
        if (c.size() != 3) throw RequestError{422, "point light color must have 3 entries"};
        p.color = {c[0], c[1], c[2]};
      }
    } catch (const nlohmann::json::exception& e) {
      throw RequestError{400, std::string("malformed point light: ") + e.what()};
    }
    try {
      p.validate();
    } catch (const Error& e) {
      throw RequestError{422, e.what()};
    }
    lights.push_back(p);
  }
  return lights;
}

// A light is either the raw 768-float wire vector or a preset description.
LightMap parse_light(const nlohmann::json& spec) {
  if (spec.is_array()) {
    if (spec.size() != static_cast<std::size_t>(kLightSize)) {
      throw RequestError{422, "light vector must have 768 entries, got " + std::to_string(spec.size())};
    }
    std::vector<float> values;
    for (const auto& v : spec) {
      if (!v.is_number()) throw RequestError{400, "light vector entries must be numbers"};
      values.push_back(v.get<float>());
    }
    try {
      return LightMap::from_values(values);
    } catch (const Error& e) {
      throw RequestError{422, e.what()};
    }
  }
  if (!spec.is_object()) throw RequestError{400, "light must be a 768-float array or a preset object"};
  LightMap map;
  if (spec.contains("preset")) {
    if (!spec.at("preset").is_string()) throw RequestError{400, "preset must be a string"};
    const auto name = spec.at("preset").get<std::string>();
    bool found = false;
    for (const auto& p : preset_library()) {
      if (p.name == name) {
        map = p.map;
        found = true;
      }
    }
    if (!found) throw RequestError{422, "unknown preset " + name};
    const auto& rot = spec.contains("rotation") ? spec.at("rotation") : nlohmann::json(0);
    if (!rot.is_number_integer()) throw RequestError{400, "rotation must be an integer"};
    map = rotate_light(map, rot.get<int>());
  }
  if (spec.contains("point_lights")) map += project_point_lights(parse_point_lights(spec.at("point_lights")));
  if (!spec.contains("preset") && !spec.contains("point_lights")) throw RequestError{400, "light object needs a preset or point_lights"};
  return map;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw RequestError{400, "request body must be a JSON object"};
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError{400, std::string("malformed JSON: ") + e.what()};
  }
}

std::string decode_b64_field(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string()) throw RequestError{400, std::string("missing string field ") + field};
  const auto bytes = base64_decode(j.at(field).get<std::string>());
  if (!bytes) throw RequestError{400, std::string(field) + " is not valid base64"};
  return std::string(bytes->begin(), bytes->end());
}

bool option(const nlohmann::json& request, const char* name, bool fallback) {
  if (!request.contains("options")) return fallback;
  const auto& o = request.at("options");
  if (!o.is_object()) throw RequestError{400, "options must be an object"};
  if (!o.contains(name)) return fallback;
  if (!o.at(name).is_boolean()) throw RequestError{400, std::string("option ") + name + " must be a boolean"};
  return o.at(name).get<bool>();
}

std::string png_b64(const Image& img) { return base64_encode(encode_png(img)); }

Image light_thumbnail(const LightMap& map) {
  const float peak = map.max_value();
  Image img(kLightRows, kLightCols, 3);
  for (int r = 0; r < kLightRows; ++r)
    for (int c = 0; c < kLightCols; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = peak > 0 ? map.at(r, c, ch) / peak : 0.0f;
  return resize_nearest(img, 4 * kLightRows, 4 * kLightCols);
}

template <typename F>
HttpReply guarded(F&& f) {
  try {
    return f();
  } catch (const RequestError& e) {
    return error_reply(e.status, e.message);
  } catch (const ShapeError& e) {
    return error_reply(422, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace

RelightService::RelightService(Relighter relighter, ServiceOptions options)
    : relighter_(std::move(relighter)), options_(options) {}

HttpReply RelightService::health() const {
  return json_reply({{"status", "ok"},
                     {"version", kServiceVersion},
                     {"checkpoint_id", relighter_.info().id},
                     {"step", relighter_.info().step},
                     {"config", relighter_.config().to_json()}});
}

HttpReply RelightService::presets() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : preset_library()) {
    list.push_back({{"name", p.name}, {"light", light_to_json(p.map)}, {"thumbnail_png_base64", png_b64(light_thumbnail(p.map))}});
  }
  return json_reply({{"presets", list}});
}

HttpReply RelightService::relight_request(const nlohmann::json& request, const std::string& png) const {
  const auto start = std::chrono::steady_clock::now();
  if (png.size() > options_.max_image_bytes) throw RequestError{413, "image exceeds " + std::to_string(options_.max_image_bytes) + " bytes"};
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(png.data()), png.size());
  PngInfo info;
  Image image;
  try {
    info = probe_png(bytes);
  } catch (const Error& e) {
    throw RequestError{400, std::string("image is not a PNG: ") + e.what()};
  }
  if (info.width > options_.max_image_side || info.height > options_.max_image_side) {
    throw RequestError{413, "image side exceeds " + std::to_string(options_.max_image_side) + " pixels"};
  }
  try {
    image = decode_png(bytes, 3);
  } catch (const Error& e) {
    throw RequestError{400, std::string("cannot decode image: ") + e.what()};
  }
  if (!request.contains("target_light")) throw RequestError{400, "missing target_light"};
  const auto target = parse_light(request.at("target_light"));
  const bool resize = option(request, "resize", false);
  const auto& cfg = relighter_.config();
  if (image.height != cfg.height || image.width != cfg.width) {
    if (!resize) {
      throw RequestError{422, "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                  "; the model expects " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
                                  " (set options.resize to resample)"};
    }
    image = resize_bilinear(image, cfg.height, cfg.width);
  }
  const auto out = relighter_.relight(image, target);
  nlohmann::json reply = {{"image_png_base64", png_b64(out.image)}, {"width", out.image.width}, {"height", out.image.height}};
  if (option(request, "return_light", true)) reply["predicted_source_light"] = light_to_json(out.source_light);
  if (option(request, "return_parsing", false)) reply["parsing_png_base64"] = png_b64(out.parsing);
  if (option(request, "timing", false)) {
    reply["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return json_reply(reply);
}

HttpReply RelightService::relight_json(const std::string& body) const {
  return guarded([&] {
    const auto request = parse_body(body);
    return relight_request(request, decode_b64_field(request, "image_png_base64"));
  });
}

HttpReply RelightService::relight_multipart(const std::map<std::string, std::string>& fields) const {
  return guarded([&] {
    const auto image = fields.find("image");
    if (image == fields.end()) throw RequestError{400, "missing multipart field image"};
    const auto request = fields.count("request") ? parse_body(fields.at("request")) : nlohmann::json::object();
    return relight_request(request, image->second);
  });
}

HttpReply RelightService::relight_sequence(const std::string& body) const {
  return guarded([&] {
    const auto request = parse_body(body);
    if (!request.contains("frames") || !request.at("frames").is_array() || request.at("frames").empty()) {
      throw RequestError{400, "frames must be a non-empty array"};
    }
    const auto& frames = request.at("frames");
    if (frames.size() > static_cast<std::size_t>(options_.max_sequence_frames)) {
      throw RequestError{413, "too many frames"};
    }
    std::vector<LightMap> lights;
    if (request.contains("lights")) {
      const auto& list = request.at("lights");
      if (!list.is_array() || list.size() != frames.size()) throw RequestError{400, "lights must list one light per frame"};
      for (const auto& l : list) lights.push_back(parse_light(l));
    } else if (request.contains("target_light")) {
      lights.assign(frames.size(), parse_light(request.at("target_light")));
    } else {
      throw RequestError{400, "missing lights or target_light"};
    }
    const auto& cfg = relighter_.config();
    const bool resize = option(request, "resize", false);
    nlohmann::json out_frames = nlohmann::json::array();
    std::vector<double> series;
    Image prev;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!frames[i].is_string()) throw RequestError{400, "frames must be base64 strings"};
      const auto bytes = base64_decode(frames[i].get<std::string>());
      if (!bytes) throw RequestError{400, "frame " + std::to_string(i) + " is not valid base64"};
      if (bytes->size() > options_.max_image_bytes) throw RequestError{413, "frame " + std::to_string(i) + " is too large"};
      Image image;
      try {
        const auto info = probe_png(*bytes);
        if (info.width > options_.max_image_side || info.height > options_.max_image_side) {
          throw RequestError{413, "frame " + std::to_string(i) + " exceeds the size limit"};
        }
        image = decode_png(*bytes, 3);
      } catch (const Error& e) {
        throw RequestError{400, "frame " + std::to_string(i) + ": " + e.what()};
      }
      if (image.height != cfg.height || image.width != cfg.width) {
        if (!resize) throw RequestError{422, "frame " + std::to_string(i) + " does not match the model size"};
        image = resize_bilinear(image, cfg.height, cfg.width);
      }
      auto relit = relighter_.relight(image, lights[i]).image;
      out_frames.push_back(png_b64(relit));
      if (i > 0) series.push_back(masked_rmse(relit, prev, Image(cfg.height, cfg.width, 1, 1.0f)));
      prev = std::move(relit);
    }
    return json_reply({{"frames", out_frames}, {"adjacent_rmse", series}});
  });
}

HttpReply RelightService::point_light_map(const std::string& body) const {
  return guarded([&] {
    const auto request = parse_body(body);
    if (!request.contains("point_lights")) throw RequestError{400, "missing point_lights"};
    return json_reply({{"light", light_to_json(project_point_lights(parse_point_lights(request.at("point_lights"))))}});
  });
}

struct HttpServer::Impl {
  const RelightService& service;
  httplib::Server server;
};

HttpServer::HttpServer(const RelightService& service) : impl_(new Impl{service, {}}) {
  auto& srv = impl_->server;
  const auto& svc = impl_->service;
  const int threads = std::max(1, svc.options().threads);
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  srv.set_payload_max_length(svc.options().max_image_bytes * 2 + (1u << 20));
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  srv.Get("/health", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
  srv.Get("/presets", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.presets()); });
  srv.Post("/relight", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      std::map<std::string, std::string> fields;
      for (const auto& [name, file] : req.files) fields[name] = file.content;
      send(res, svc.relight_multipart(fields));
    } else {
      send(res, svc.relight_json(req.body));
    }
  });
  srv.Post("/relight-sequence", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.relight_sequence(req.body));
  });
  srv.Post("/point-light-map", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.point_light_map(req.body));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

int HttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace relight
