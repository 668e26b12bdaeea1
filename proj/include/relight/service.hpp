#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "relight/inference.hpp"

namespace relight {

struct ServiceOptions {
  std::size_t max_image_bytes = 4u << 20;  // encoded PNG size
  int max_image_side = 2048;
  int max_sequence_frames = 256;
  int threads = 4;
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Request handling, independent of the HTTP transport. Every handler is
// const: the loaded model is never mutated, so handlers may run concurrently.
// Errors come back as JSON {"error": ...} with status 400 (malformed), 413
// (oversize image) or 422 (invalid light or image size).
class RelightService {
 public:
  explicit RelightService(Relighter relighter, ServiceOptions options = {});

  HttpReply health() const;
  HttpReply presets() const;
  // JSON body: {"image_png_base64", "target_light": [768] | {"preset",
  // "rotation", "point_lights"}, "options": {"return_light", "return_parsing",
  // "resize", "timing"}}.
  HttpReply relight_json(const std::string& body) const;
  // Multipart fields: "image" (PNG bytes) and "request" (the JSON body above
  // without the image).
  HttpReply relight_multipart(const std::map<std::string, std::string>& fields) const;
  // {"frames": [png_base64...], "lights": [light per frame] | "target_light": light, "options"}.
  HttpReply relight_sequence(const std::string& body) const;
  // {"point_lights": [{"direction", "distance", "color"}]} -> {"light": [768]}.
  HttpReply point_light_map(const std::string& body) const;

  const ServiceOptions& options() const { return options_; }

 private:
  HttpReply relight_request(const nlohmann::json& request, const std::string& png) const;

  Relighter relighter_;
  ServiceOptions options_;
};

// httplib transport over a RelightService.
class HttpServer {
 public:
  explicit HttpServer(const RelightService& service);
  ~HttpServer();

  // Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  int bind_any_port(const std::string& host);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relight
