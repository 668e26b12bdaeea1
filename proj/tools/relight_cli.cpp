// relight: data generation, training, evaluation and serving.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "relight/dataset.hpp"
#include "relight/errors.hpp"
#include "relight/evaluation.hpp"
#include "relight/inference.hpp"
#include "relight/png_io.hpp"
#include "relight/service.hpp"
#include "relight/training.hpp"

namespace fs = std::filesystem;
using namespace relight;

namespace {

constexpr int kExitFlags = 2;
constexpr int kExitFormat = 3;
constexpr int kExitCheckpoint = 4;


std::string checkpoint_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("RELIGHT_CHECKPOINT"); env != nullptr && *env != '\0') return env;
  throw ConfigError("--checkpoint is required (or set RELIGHT_CHECKPOINT)");
}

LightMap preset_by_name(const std::string& name) {
  for (const auto& p : preset_library()) {
    if (p.name == name) return p.map;
  }
  std::string names;
  for (const auto& p : preset_library()) names += (names.empty() ? "" : ", ") + p.name;
  throw ConfigError("--preset: unknown preset '" + name + "' (one of " + names + ")");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path, e.what());
  }
}

std::vector<OlatSequence> read_split(const std::string& data, const std::string& split) {
  auto all = read_dataset(data);
  if (all.empty()) throw FormatError(data, "no sequences found");
  if (split == "all") return all;
  auto parts = split_by_identity(std::move(all));
  return split == "train" ? parts.train : parts.test;
}

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 7;
  int identities = 4;
  int takes = 2;
  int frames = 16;
  int size = 64;
  int lights = 16;
};

int gen_data(const GenDataArgs& a) {
  for (int id = 0; id < a.identities; ++id) {
    for (int take = 0; take < a.takes; ++take) {
      const auto spec = make_scene(id, take, a.frames, a.seed, a.size, a.size, a.lights);
      const auto dir = write_sequence(render_sequence(spec), a.out);
      std::cout << dir.string() << "\n";
    }
  }
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out = "model.ckpt";
  std::string log;
  std::optional<int> steps, warmup, batch;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda4;
  int log_every = 50;
};

int train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    try {
      cfg = TrainConfig::from_json(read_json(a.config));
    } catch (const ConfigError& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (a.steps) cfg.steps = *a.steps;
  if (a.warmup) cfg.warmup_steps = *a.warmup;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lambda4) cfg.weights.lambda4 = *a.lambda4;
  cfg.validate();

  auto train_set = read_split(a.data, "train");
  if (train_set.front().height() != cfg.model.height || train_set.front().width() != cfg.model.width) {
    throw ConfigError("data frames are " + std::to_string(train_set.front().width()) + "x" +
                      std::to_string(train_set.front().height()) + " but the model is configured for " +
                      std::to_string(cfg.model.width) + "x" + std::to_string(cfg.model.height));
  }
  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw FormatError(a.log, "cannot write");
  }
  Trainer trainer(cfg, std::move(train_set), preset_maps());
  trainer.run([&](std::int64_t step, const StepResult& r) {
    const auto line = step_log_line(step, r).dump();
    if (log.is_open()) log << line << "\n";
    if (step % a.log_every == 0 || step == cfg.steps) std::cout << line << std::endl;
    if (step % cfg.checkpoint_every == 0 && step != cfg.steps) trainer.save(a.out);
    return true;
  });
  trainer.save(a.out);
  std::cout << "checkpoint " << a.out << " id " << read_checkpoint_info(a.out).id << "\n";
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "report.json";
  std::string split = "test";
  bool oracle = false;
  std::uint64_t seed = 7;
  int stride = 1;
};

RelightFn relighter_for(bool oracle, const std::string& checkpoint, nlohmann::json& metadata,
                        std::optional<Relighter>& holder) {
  if (oracle) {
    metadata["relighter"] = "oracle";
    return oracle_relighter();
  }
  holder.emplace(Relighter::from_checkpoint(checkpoint_path(checkpoint)));
  metadata["relighter"] = "checkpoint";
  metadata["checkpoint_id"] = holder->info().id;
  metadata["step"] = holder->info().step;
  return holder->as_fn();
}

int eval(const EvalArgs& a) {
  nlohmann::json metadata;
  std::optional<Relighter> holder;
  const auto fn = relighter_for(a.oracle, a.checkpoint, metadata, holder);
  const auto held_out = read_split(a.data, a.split);
  EvalConfig cfg;
  cfg.seed = a.seed;
  cfg.frame_stride = a.stride;
  auto report = evaluate(fn, held_out, preset_maps(), cfg);
  metadata["split"] = a.split;
  metadata["seed"] = a.seed;
  report.metadata = metadata;
  report.write(a.out);
  std::cout << "rmse " << report.rmse << " psnr " << report.psnr << " ssim " << report.ssim << "\n";
  return 0;
}

struct JitterArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "jitter.csv";
  std::string target = "noon";
  bool oracle = false;
  std::uint64_t seed = 99;
  int keys = 24;
  double frames_per_key = 100.0;
  int frames = 200;
};

int jitter(const JitterArgs& a) {
  nlohmann::json metadata;
  std::optional<Relighter> holder;
  const auto fn = relighter_for(a.oracle, a.checkpoint, metadata, holder);
  const auto test = read_split(a.data, "test");
  Rng rng(a.seed);
  const auto path = LightPath::random(rng, preset_maps(), a.keys, a.frames_per_key);
  EvalReport report;
  report.jitter_curve = jitter_benchmark(fn, test.front().frames.front(), test.front().light_directions, path,
                                         default_speedups(), preset_by_name(a.target), a.frames);
  report.write_jitter_csv(a.out);
  for (const auto& p : report.jitter_curve) std::cout << p.speedup << " " << p.jitter << "\n";
  return 0;
}

struct ServeArgs {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 4;
  std::size_t max_image_bytes = 4u << 20;
};

HttpServer* g_server = nullptr;

int serve(const ServeArgs& a) {
  ServiceOptions options;
  options.threads = a.threads;
  options.max_image_bytes = a.max_image_bytes;
  const RelightService service(Relighter::from_checkpoint(checkpoint_path(a.checkpoint)), options);
  HttpServer server(service);
  const int port = a.port == 0 ? server.bind_any_port(a.host) : server.bind(a.host, a.port);
  if (port <= 0) throw ConfigError("--port: cannot bind " + a.host + ":" + std::to_string(a.port));
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cout << "listening on http://" << a.host << ":" << port << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

struct RelightArgs {
  std::string checkpoint;
  std::string input;
  std::string out = "relit.png";
  std::string light;
  std::string preset;
  int rotation = 0;
  bool source_light = false;
  bool resize = false;
  std::string light_out;
  std::string parsing_out;
};

int relight_one(const RelightArgs& a) {
  const int chosen = static_cast<int>(!a.light.empty()) + static_cast<int>(!a.preset.empty()) + static_cast<int>(a.source_light);
  if (chosen != 1) throw ConfigError("exactly one of --light, --preset or --source-light is required");
  const auto relighter = Relighter::from_checkpoint(checkpoint_path(a.checkpoint));
  auto image = read_png(a.input, 3);
  const auto& cfg = relighter.config();
  if (image.height != cfg.height || image.width != cfg.width) {
    if (!a.resize) {
      throw FormatError(a.input, "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                     "; the model expects " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
                                     " (pass --resize)");
    }
    image = resize_bilinear(image, cfg.height, cfg.width);
  }
  RelightResult result;
  if (a.source_light) {
    result = relighter.reconstruct(image);
  } else {
    const auto target = a.light.empty() ? rotate_light(preset_by_name(a.preset), a.rotation) : read_light_map(a.light);
    result = relighter.relight(image, target);
  }
  write_png(a.out, result.image);
  if (!a.light_out.empty()) write_light_map(result.source_light, a.light_out);
  if (!a.parsing_out.empty()) write_png(a.parsing_out, result.parsing);
  return 0;
}

int describe(const std::string& checkpoint, const std::string& config) {
  ModelConfig model;
  if (!config.empty()) {
    model = TrainConfig::from_json(read_json(config)).model;
  } else {
    const auto info = read_checkpoint_info(checkpoint_path(checkpoint));
    std::cout << "checkpoint " << info.id << " step " << info.step << "\n";
    model = info.model;
  }
  model.validate();
  std::cout << describe_table(*RelightNet(model)) << "discriminator\n" << describe_table(*Discriminator(model));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural video portrait relighting: data generation, training, evaluation and serving."};
  app.name("relight");
  app.footer("Environment: RELIGHT_CHECKPOINT supplies --checkpoint when the flag is absent.\n"
             "Exit codes: 0 ok, 2 flag or config error, 3 data format error, 4 checkpoint error.");
  app.require_subcommand(1);
  app.set_version_flag("--version", "relight 0.1.0");

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Render synthetic dynamic-OLAT sequences.");
  gen->add_option("--out", gd.out, "Output dataset root")->required();
  gen->add_option("--seed", gd.seed, "Dataset seed (appearance per identity, motion per take)")->capture_default_str();
  gen->add_option("--identities", gd.identities, "Number of identities")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--takes", gd.takes, "Takes per identity")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--frames", gd.frames, "Frames per take")->capture_default_str()->check(CLI::Range(2, 100000));
  gen->add_option("--size", gd.size, "Frame side in pixels (power of two, >= 32)")->capture_default_str();
  gen->add_option("--lights", gd.lights, "OLAT light count")->capture_default_str();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the relighting network.");
  tr->add_option("--data", ta.data, "Dataset root from gen-data")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--config", ta.config, "Training config JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", ta.out, "Checkpoint path")->capture_default_str();
  tr->add_option("--log", ta.log, "Per-step JSON lines log");
  tr->add_option("--steps", ta.steps, "Override the number of steps");
  tr->add_option("--warmup", ta.warmup, "Override the warm-up steps");
  tr->add_option("--batch", ta.batch, "Override the batch size");
  tr->add_option("--seed", ta.seed, "Override the seed");
  tr->add_option("--lambda4", ta.lambda4, "Override the temporal loss weight");
  tr->add_option("--log-every", ta.log_every, "Print every N steps")->capture_default_str()->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Held-out RMSE / PSNR / SSIM report.");
  ev->add_option("--data", ea.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint (default $RELIGHT_CHECKPOINT)");
  ev->add_flag("--oracle", ea.oracle, "Use ground-truth composites as predictions");
  ev->add_option("--out", ea.out, "Report JSON path")->capture_default_str();
  ev->add_option("--split", ea.split, "Sequences to evaluate")->capture_default_str()->check(CLI::IsMember({"test", "train", "all"}));
  ev->add_option("--seed", ea.seed, "Lighting sample seed")->capture_default_str();
  ev->add_option("--stride", ea.stride, "Evaluate every Nth frame")->capture_default_str()->check(CLI::PositiveNumber);

  JitterArgs ja;
  auto* ji = app.add_subcommand("jitter", "Temporal jitter curve over lighting speedups 1..10.");
  ji->add_option("--data", ja.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  ji->add_option("--checkpoint", ja.checkpoint, "Checkpoint (default $RELIGHT_CHECKPOINT)");
  ji->add_flag("--oracle", ja.oracle, "Use ground-truth composites as predictions");
  ji->add_option("--out", ja.out, "CSV path (speedup,jitter)")->capture_default_str();
  ji->add_option("--target", ja.target, "Target preset")->capture_default_str();
  ji->add_option("--seed", ja.seed, "Light path seed")->capture_default_str();
  ji->add_option("--keys", ja.keys, "Light path keyframes")->capture_default_str()->check(CLI::Range(2, 100000));
  ji->add_option("--frames-per-key", ja.frames_per_key, "Frames between keyframes at speedup 1")->capture_default_str()->check(CLI::PositiveNumber);
  ji->add_option("--frames", ja.frames, "Frames per speedup")->capture_default_str()->check(CLI::Range(2, 100000));

  ServeArgs sa;
  auto* se = app.add_subcommand("serve", "HTTP inference service.");
  se->add_option("--checkpoint", sa.checkpoint, "Checkpoint (default $RELIGHT_CHECKPOINT)");
  se->add_option("--host", sa.host, "Bind address")->capture_default_str();
  se->add_option("--port", sa.port, "Port, 0 for any")->capture_default_str()->check(CLI::Range(0, 65535));
  se->add_option("--threads", sa.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  se->add_option("--max-image-bytes", sa.max_image_bytes, "Largest accepted PNG")->capture_default_str();

  RelightArgs ra;
  auto* re = app.add_subcommand("relight", "Relight one PNG.");
  re->add_option("--checkpoint", ra.checkpoint, "Checkpoint (default $RELIGHT_CHECKPOINT)");
  re->add_option("--input", ra.input, "Input PNG")->required()->check(CLI::ExistingFile);
  re->add_option("--out", ra.out, "Output PNG")->capture_default_str();
  re->add_option("--light", ra.light, "Target light map (.f32)")->check(CLI::ExistingFile);
  re->add_option("--preset", ra.preset, "Target preset name");
  re->add_option("--rotation", ra.rotation, "Preset longitude rotation in columns")->capture_default_str();
  re->add_flag("--source-light", ra.source_light, "Relight under the predicted source light");
  re->add_flag("--resize", ra.resize, "Resample the input to the model size");
  re->add_option("--light-out", ra.light_out, "Write the predicted source light (.f32)");
  re->add_option("--parsing-out", ra.parsing_out, "Write the parsing map PNG");

  std::string desc_checkpoint, desc_config;
  auto* de = app.add_subcommand("describe", "Print layer shapes and parameter counts.");
  de->add_option("--checkpoint", desc_checkpoint, "Checkpoint (default $RELIGHT_CHECKPOINT)");
  de->add_option("--config", desc_config, "Training config JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFlags;
  }

  try {
    if (gen->parsed()) return gen_data(gd);
    if (tr->parsed()) return train(ta);
    if (ev->parsed()) return eval(ea);
    if (ji->parsed()) return jitter(ja);
    if (se->parsed()) return serve(sa);
    if (re->parsed()) return relight_one(ra);
    if (de->parsed()) return describe(desc_checkpoint, desc_config);
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitFlags;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitFlags;
}
