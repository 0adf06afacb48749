#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "hcrnn/checkpoint.hpp"
#include "hcrnn/error.hpp"
#include "hcrnn/evaluate.hpp"
#include "hcrnn/manifest.hpp"
#include "hcrnn/synth.hpp"

namespace hcrnn::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json model_config_json(const ModelConfig& c) {
  return json{{"encoder_channels", c.encoder_channels}, {"input_size", c.input_size},
              {"branch_width", c.branch_width},         {"ensemble_width", c.ensemble_width},
              {"palm_hidden_layers", c.palm_hidden_layers}, {"two_branch_width", c.two_branch_width}};
}

ModelConfig model_config_from_json(const json& j) {
  static const std::set<std::string> known{"encoder_channels", "input_size",         "branch_width",
                                           "ensemble_width",   "palm_hidden_layers", "two_branch_width"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model key '" + key + "'");
  }
  ModelConfig c = ModelConfig::tiny();
  if (j.contains("encoder_channels")) c.encoder_channels = j["encoder_channels"].get<std::array<std::size_t, 5>>();
  if (j.contains("input_size")) c.input_size = j["input_size"].get<std::size_t>();
  if (j.contains("branch_width")) c.branch_width = j["branch_width"].get<std::size_t>();
  if (j.contains("ensemble_width")) c.ensemble_width = j["ensemble_width"].get<std::size_t>();
  if (j.contains("palm_hidden_layers")) c.palm_hidden_layers = j["palm_hidden_layers"].get<std::size_t>();
  if (j.contains("two_branch_width")) c.two_branch_width = j["two_branch_width"].get<std::size_t>();
  return c;
}

ModelConfig named_model(const std::string& name) {
  if (name == "reference") return ModelConfig::reference();
  if (name == "tiny") return ModelConfig::tiny();
  throw ConfigError("unknown model '" + name + "' (expected reference or tiny)");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
}

void prepare_output(const fs::path& dir, const json& resolved) {
  fs::create_directories(dir);
  write_json(dir / "config.json", resolved);
}

std::vector<HandSample> samples_from(const std::vector<RawFrame>& frames, double cube) {
  std::vector<HandSample> out;
  out.reserve(frames.size());
  for (const RawFrame& f : frames) out.push_back(make_sample(f, CenterPolicy::reference, cube));
  return out;
}

void require_manifest(const fs::path& manifest) {
  if (!fs::exists(manifest)) throw ConfigError("manifest not found: '" + manifest.string() + "'");
}

std::vector<HandSample> load_samples(const ExperimentConfig& cfg) {
  if (!cfg.manifest.empty()) {
    require_manifest(cfg.manifest);
    return samples_from(load_manifest(cfg.manifest, cfg.topology), cfg.cube_size);
  }
  if (cfg.synth_frames > 0) {
    return samples_from(synth_frames(cfg.synth_frames, cfg.topology, cfg.seed, cfg.synth_noise_mm, cfg.synth_subjects),
                        cfg.cube_size);
  }
  throw ConfigError("no training data: pass --manifest or --synth-frames");
}

// Flags shared by commands that resolve an ExperimentConfig.
struct ExperimentFlags {
  std::string config_path;
  std::string topology, topology_file, variant, model, precision, manifest, output;
  std::uint64_t seed = 0;
  std::size_t synth_frames = 0, synth_subjects = 1;
  double synth_noise_mm = 0, cube_size = 300;
  double lr0 = 0, weight_decay = 0, lambda = 0;
  std::size_t batch_size = 0, epochs = 0, max_iterations = 0, checkpoint_every = 0;
  bool no_augment = false;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app, bool training) {
    app->add_option("--config", config_path, "JSON experiment config; flags override it")->check(CLI::ExistingFile);
    opts.push_back(app->add_option("--topology", topology, "Topology preset: msra, icvl or nyu"));
    opts.push_back(app->add_option("--topology-file", topology_file, "Custom topology descriptor (JSON)"));
    opts.push_back(app->add_option("--variant", variant, "full, two_branch or fc_regression"));
    opts.push_back(app->add_option("--model", model, "Width preset: reference or tiny"));
    opts.push_back(app->add_option("--precision", precision, "f32 or f64"));
    opts.push_back(app->add_option("--manifest", manifest, "Dataset manifest (JSON lines)"));
    opts.push_back(app->add_option("--output", output, "Output directory"));
    opts.push_back(app->add_option("--seed", seed, "Root seed"));
    opts.push_back(app->add_option("--synth-frames", synth_frames, "Generate this many synthetic frames in memory"));
    opts.push_back(app->add_option("--synth-subjects", synth_subjects, "Subjects to spread synthetic frames over"));
    opts.push_back(app->add_option("--synth-noise-mm", synth_noise_mm, "Synthetic depth noise (mm)"));
    opts.push_back(app->add_option("--cube-size", cube_size, "Crop cube edge (mm)"));
    if (!training) return;
    opts.push_back(app->add_option("--lr0", lr0, "Initial learning rate"));
    opts.push_back(app->add_option("--batch-size", batch_size, "Mini-batch size"));
    opts.push_back(app->add_option("--weight-decay", weight_decay, "Decoupled weight decay"));
    opts.push_back(app->add_option("--lambda", lambda, "Local loss weight"));
    opts.push_back(app->add_option("--epochs", epochs, "Training epochs"));
    opts.push_back(app->add_option("--max-iterations", max_iterations, "Iteration cap (0: none)"));
    opts.push_back(app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint period in iterations"));
    opts.push_back(app->add_flag("--no-augment", no_augment, "Disable online augmentation"));
  }

  bool given(const char* name) const {
    for (CLI::Option* o : opts) {
      if (o->check_name(name)) return o->count() > 0;
    }
    return false;
  }

  ExperimentConfig resolve(const std::string& command) const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_experiment(config_path);
    if (given("--topology")) c.topology = JointTopology::preset(topology);
    if (given("--topology-file")) {
      std::ifstream in(topology_file);
      if (!in) throw ConfigError("cannot open topology descriptor '" + topology_file + "'");
      try {
        c.topology = json::parse(in).get<JointTopology>();
      } catch (const json::exception& e) {
        throw ConfigError("bad topology descriptor '" + topology_file + "': " + e.what());
      }
    }
    if (given("--variant")) c.variant = parse_variant(variant);
    if (given("--model")) {
      c.model = model;
      c.model_config = named_model(model);
    }
    if (given("--precision")) c.train.precision = parse_precision(precision);
    if (given("--manifest")) c.manifest = manifest;
    if (given("--output")) c.output = output;
    if (given("--seed")) c.seed = seed;
    if (given("--synth-frames") || given("--frames")) c.synth_frames = synth_frames;
    if (given("--synth-subjects")) c.synth_subjects = synth_subjects;
    if (given("--synth-noise-mm")) c.synth_noise_mm = synth_noise_mm;
    if (given("--cube-size")) c.cube_size = cube_size;
    if (given("--lr0")) c.train.lr0 = lr0;
    if (given("--batch-size")) c.train.batch_size = batch_size;
    if (given("--weight-decay")) c.train.weight_decay = weight_decay;
    if (given("--lambda")) c.train.lambda = lambda;
    if (given("--epochs")) c.train.epochs = epochs;
    if (given("--max-iterations")) c.train.max_iterations = max_iterations;
    if (given("--checkpoint-every")) c.train.checkpoint_every = checkpoint_every;
    if (no_augment) c.train.augment = false;
    if (c.output.empty()) c.output = default_output(command);
    c.train.seed = derive_seed(c.seed, "train");
    if (c.train.checkpoint_every > 0 && c.train.checkpoint_dir.empty()) c.train.checkpoint_dir = c.output / "checkpoints";
    if (!(c.cube_size > 0)) throw ConfigError("cube_size must be positive");
    c.topology.validate();
    return c;
  }
};

template <typename T>
void write_loss_log(const fs::path& path, const TrainResult& result) {
  std::ofstream out(path, std::ios::trunc);
  for (const LossRecord& r : result.log) out << json(r).dump() << '\n';
  if (!out) throw FormatError("cannot write loss log '" + path.string() + "'");
}

template <typename T>
int do_train(const ExperimentConfig& cfg) {
  const std::vector<HandSample> data = load_samples(cfg);
  HcrnnModel<T> model(cfg.model_config, cfg.topology, cfg.variant, derive_seed(cfg.seed, "init"));
  std::cout << "training " << to_string(cfg.variant) << " (" << model.parameter_count() << " parameters) on "
            << data.size() << " frames\n";
  const TrainResult result = train(model, data, cfg.train, [](const LossRecord& r) {
    if (r.iteration % 100 == 0) {
      std::cout << "iter " << r.iteration << " loss " << r.total << " lr " << r.lr << '\n' << std::flush;
    }
    return true;
  });
  write_loss_log<T>(cfg.output / "loss_log.jsonl", result);
  save_model(model, cfg.output / "model.ckpt", json{{"iterations", result.iterations}, {"config", to_json(cfg)}});
  std::cout << "wrote " << (cfg.output / "model.ckpt").string() << " after " << result.iterations
            << " iterations\n";
  return kOk;
}

struct EvalFlags {
  std::string checkpoint, manifest, predictions, output, thresholds = "0:80:2", center = "reference";
  std::size_t timed_frames = 20;
  double cube_size = 300;
};

CenterPolicy parse_center(const std::string& s) {
  if (s == "reference") return CenterPolicy::reference;
  if (s == "mass") return CenterPolicy::mass_centroid;
  throw ConfigError("unknown center policy '" + s + "' (expected reference or mass)");
}

std::vector<HandSample> manifest_samples(const fs::path& manifest, const JointTopology& topo, CenterPolicy center,
                                         double cube) {
  require_manifest(manifest);
  std::vector<HandSample> out;
  for (const RawFrame& f : load_manifest(manifest, topo)) out.push_back(make_sample(f, center, cube));
  return out;
}

template <typename T>
EvalReport eval_checkpoint(const EvalFlags& flags) {
  HcrnnModel<T> model = load_model<T>(flags.checkpoint);
  const auto samples = manifest_samples(flags.manifest, model.topology(), parse_center(flags.center), flags.cube_size);
  EvalOptions opts;
  opts.thresholds = parse_thresholds(flags.thresholds);
  opts.timed_frames = flags.timed_frames;
  return evaluate(model, samples, opts);
}

EvalReport eval_predictions(const EvalFlags& flags) {
  require_manifest(flags.manifest);
  const std::vector<ManifestRecord> records = read_manifest(flags.manifest);
  std::ifstream in(flags.predictions);
  if (!in) throw ConfigError("predictions not found: '" + flags.predictions + "'");
  std::vector<std::vector<Vec3>> predicted, truth;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(n, std::string("invalid prediction record: ") + e.what());
    }
    if (rec.contains("error")) continue;
    const auto index = rec.at("index").get<std::size_t>();
    if (index >= records.size()) throw ValidationError("prediction index " + std::to_string(index) + " out of range");
    const auto flat = rec.at("joints_mm").get<std::vector<double>>();
    std::vector<Vec3> joints(flat.size() / 3);
    for (std::size_t j = 0; j < joints.size(); ++j) joints[j] = {flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]};
    predicted.push_back(std::move(joints));
    truth.push_back(records[index].joints);
  }
  const auto thresholds = parse_thresholds(flags.thresholds);
  return compute_metrics(predicted, truth, thresholds);
}

int do_eval(const EvalFlags& flags, const json& resolved) {
  if (flags.manifest.empty()) throw ConfigError("eval needs --manifest");
  if (flags.checkpoint.empty() == flags.predictions.empty()) {
    throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
  }
  const fs::path out = flags.output.empty() ? default_output("eval") : fs::path(flags.output);
  EvalReport report;
  if (!flags.predictions.empty()) {
    report = eval_predictions(flags);
  } else {
    if (!fs::exists(flags.checkpoint)) throw ConfigError("checkpoint not found: '" + flags.checkpoint + "'");
    report = read_checkpoint_info(flags.checkpoint).precision == Precision::f64 ? eval_checkpoint<double>(flags)
                                                                                : eval_checkpoint<float>(flags);
  }
  prepare_output(out, resolved);
  write_report(out, report, resolved);
  std::cout.precision(10);
  std::cout << "frames " << report.frames << " mean error " << report.mean_error_mm << " mm\n";
  return kOk;
}

struct InferFlags {
  std::string checkpoint, input, output, center = "reference";
  double fx = 475, fy = 475, cx = 160, cy = 120, cube_size = 300;
  std::int32_t png_scale_um = 1000;
};

template <typename T>
int do_infer(const InferFlags& flags, const json& resolved) {
  if (!fs::exists(flags.checkpoint)) throw ConfigError("checkpoint not found: '" + flags.checkpoint + "'");
  if (!fs::exists(flags.input)) throw ConfigError("input not found: '" + flags.input + "'");
  HcrnnModel<T> model = load_model<T>(flags.checkpoint);
  const fs::path out = flags.output.empty() ? default_output("infer") : fs::path(flags.output);
  prepare_output(out, resolved);

  // (index, depth path, record) triples; a lone depth file becomes one record.
  std::vector<ManifestRecord> records;
  CenterPolicy center = parse_center(flags.center);
  if (fs::path(flags.input).extension() == ".jsonl") {
    records = read_manifest(flags.input, model.topology().total_joints());
  } else {
    ManifestRecord r;
    r.depth = flags.input;
    r.camera = {flags.fx, flags.fy, flags.cx, flags.cy};
    r.depth_scale_um = flags.png_scale_um;
    records.push_back(r);
    center = CenterPolicy::mass_centroid;
  }

  std::vector<json> lines(records.size());
  std::vector<HandSample> samples;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < records.size(); ++i) {
    lines[i] = json{{"index", i}, {"depth", records[i].depth.generic_string()}};
    try {
      const RawFrame frame = load_frame(records[i]);
      samples.push_back(make_sample(frame, center, flags.cube_size));
      owner.push_back(i);
    } catch (const Error& e) {
      lines[i]["error"] = e.what();
    }
  }
  if (!samples.empty()) {
    const auto predicted = predict_mm(model, samples);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      json joints = json::array();
      for (const Vec3& p : predicted[k]) {
        for (double v : p) joints.push_back(v);
      }
      json& rec = lines[owner[k]];
      rec["joints_mm"] = joints;
      rec["crop"] = {{"center", samples[k].crop.center}, {"cube_size", samples[k].crop.cube_size}};
    }
  }
  std::ofstream pred(out / "predictions.jsonl", std::ios::trunc);
  for (const json& l : lines) pred << l.dump() << '\n';
  if (!pred) throw FormatError("cannot write predictions in '" + out.string() + "'");
  std::cout << "wrote " << samples.size() << " predictions, " << records.size() - samples.size() << " errors\n";
  return kOk;
}

struct BenchFlags {
  std::string checkpoint, model = "tiny", variant = "full", topology = "msra", output;
  std::size_t iterations = 100, warmup = 10;
  std::uint64_t seed = 0;
};

template <typename T>
int run_bench(HcrnnModel<T>& model, const BenchFlags& flags, const json& resolved) {
  const auto frames = synth_frames(8, model.topology(), flags.seed);
  std::vector<HandSample> samples;
  for (const RawFrame& f : frames) samples.push_back(make_sample(f));
  const Throughput t = measure_throughput(model, samples, flags.warmup, flags.iterations);
  json report{{"iterations", flags.iterations},
              {"warmup", flags.warmup},
              {"batch", 1},
              {"threads", 1},
              {"parameters", model.parameter_count()},
              {"throughput", t},
              {"reference", "285 fps published for this architecture on a Titan X GPU; hardware-bound, shown for "
                            "context and never compared"}};
  const fs::path out = flags.output.empty() ? default_output("bench") : fs::path(flags.output);
  prepare_output(out, resolved);
  write_json(out / "bench.json", report);
  std::cout.precision(6);
  std::cout << "fps " << t.fps << "\nlatency_ms mean " << t.mean_ms << " p50 " << t.p50_ms << " p99 " << t.p99_ms
            << "\n# reference: 285 fps on a Titan X GPU (context only, not a target)\n";
  return kOk;
}

int do_bench(const BenchFlags& flags, const json& resolved) {
  if (flags.iterations == 0) throw ConfigError("--iterations must be at least 1");
  if (!flags.checkpoint.empty()) {
    if (!fs::exists(flags.checkpoint)) throw ConfigError("checkpoint not found: '" + flags.checkpoint + "'");
    if (read_checkpoint_info(flags.checkpoint).precision == Precision::f64) {
      auto m = load_model<double>(flags.checkpoint);
      return run_bench(m, flags, resolved);
    }
    auto m = load_model<float>(flags.checkpoint);
    return run_bench(m, flags, resolved);
  }
  HcrnnModel<float> m(named_model(flags.model), JointTopology::preset(flags.topology), parse_variant(flags.variant),
                      derive_seed(flags.seed, "init"));
  return run_bench(m, flags, resolved);
}

template <typename T>
int do_ablate(const ExperimentConfig& cfg) {
  const std::vector<HandSample> data = load_samples(cfg);
  const Variant variants[] = {Variant::full, Variant::two_branch, Variant::fc_regression};
  EvalOptions opts;
  opts.timed_frames = 0;
  const AblationReport report = run_ablation<T>(variants, cfg.model_config, cfg.topology, data, data, cfg.train, opts);
  write_json(cfg.output / "ablation.json", report);
  for (const AblationRow& r : report.rows) {
    std::cout << to_string(r.variant) << ": " << r.parameters << " parameters, mean error " << r.report.mean_error_mm
              << " mm\n";
  }
  std::cout << "parameter gap two_branch vs full " << report.parity_gap * 100 << "% ("
            << (report.parity_ok ? "within" : "outside") << " 10%)\n";
  return kOk;
}

int do_synth(const ExperimentConfig& cfg) {
  if (cfg.synth_frames == 0) throw ConfigError("--frames must be at least 1");
  const auto frames = synth_frames(cfg.synth_frames, cfg.topology, cfg.seed, cfg.synth_noise_mm, cfg.synth_subjects);
  fs::create_directories(cfg.output);
  const fs::path manifest = write_dataset(cfg.output, frames, cfg.topology);
  write_json(cfg.output / "config.json", to_json(cfg));
  std::cout << "wrote " << frames.size() << " frames to " << manifest.string() << '\n';
  return kOk;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json model = c.model == "custom" ? model_config_json(c.model_config) : json(c.model);
  json data = json::object();
  if (!c.manifest.empty()) data["manifest"] = c.manifest.string();
  if (c.synth_frames > 0) {
    data["synth"] = {{"frames", c.synth_frames}, {"noise_mm", c.synth_noise_mm}, {"subjects", c.synth_subjects}};
  }
  return json{{"topology", c.topology}, {"variant", to_string(c.variant)},
              {"model", model},         {"model_resolved", model_config_json(c.model_config)},
              {"train", c.train},       {"data", data},
              {"output", c.output.string()}, {"seed", c.seed},
              {"cube_size", c.cube_size}};
}

ExperimentConfig experiment_from_json(const json& j) {
  static const std::set<std::string> known{"topology", "variant", "model", "model_resolved", "train",
                                           "data",     "output",  "seed",  "cube_size"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("topology")) {
      c.topology = j["topology"].is_string() ? JointTopology::preset(j["topology"].get<std::string>())
                                             : j["topology"].get<JointTopology>();
    }
    if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
    if (j.contains("model")) {
      if (j["model"].is_string()) {
        c.model = j["model"].get<std::string>();
        c.model_config = named_model(c.model);
      } else {
        c.model = "custom";
        c.model_config = model_config_from_json(j["model"]);
      }
    }
    if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
    if (j.contains("data")) {
      const json& d = j["data"];
      for (const auto& [key, value] : d.items()) {
        if (key != "manifest" && key != "synth") throw ConfigError("unknown data key '" + key + "'");
      }
      if (d.contains("manifest")) c.manifest = d["manifest"].get<std::string>();
      if (d.contains("synth")) {
        const json& s = d["synth"];
        for (const auto& [key, value] : s.items()) {
          if (key != "frames" && key != "noise_mm" && key != "subjects") {
            throw ConfigError("unknown synth key '" + key + "'");
          }
        }
        c.synth_frames = s.value("frames", std::size_t{0});
        c.synth_noise_mm = s.value("noise_mm", 0.0);
        c.synth_subjects = s.value("subjects", std::size_t{1});
      }
    }
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cube_size")) c.cube_size = j["cube_size"].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

fs::path default_output(const std::string& command) {
  const char* root = std::getenv("HCRNN_OUTPUT_ROOT");
  return (root && *root ? fs::path(root) : fs::path("runs")) / command;
}

std::vector<RawFrame> synth_frames(std::size_t count, const JointTopology& topology, std::uint64_t seed,
                                   double noise_mm, std::size_t subjects) {
  Rng pose_rng(derive_seed(seed, "data"));
  const std::uint64_t render = derive_seed(seed, "render");
  SynthOptions opt;
  opt.noise_mm = noise_mm;
  std::vector<RawFrame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RawFrame f = synth_hand(random_pose(pose_rng), topology, render + i, opt);
    f.subject = "s" + std::to_string(i % std::max<std::size_t>(subjects, 1));
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  try {
    if (text.find(':') != std::string::npos) {
      std::stringstream ss(text);
      std::string a, b, c;
      std::getline(ss, a, ':');
      std::getline(ss, b, ':');
      std::getline(ss, c, ':');
      const double start = std::stod(a), stop = std::stod(b), step = c.empty() ? 1.0 : std::stod(c);
      if (!(step > 0) || stop < start) throw ConfigError("bad threshold range '" + text + "'");
      for (std::size_t k = 0;; ++k) {
        const double v = start + static_cast<double>(k) * step;
        if (v > stop + 1e-9) break;
        out.push_back(v);
      }
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
      }
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad threshold list '" + text + "'");
  }
  if (out.empty()) throw ConfigError("empty threshold list");
  return out;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Hierarchical recurrent hand-pose toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hcrnn 0.1.0");

  ExperimentFlags synth_flags, train_flags, ablate_flags;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic depth dataset");
  synth_flags.add(synth, false);
  CLI::Option* frames_opt = synth->add_option("--frames", synth_flags.synth_frames, "Number of frames");
  synth_flags.opts.push_back(frames_opt);

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_flags.add(train_cmd, true);

  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint or a predictions file");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "Model checkpoint");
  eval->add_option("--predictions", eval_flags.predictions, "predictions.jsonl written by infer");
  eval->add_option("--manifest", eval_flags.manifest, "Ground-truth manifest")->required();
  eval->add_option("--thresholds", eval_flags.thresholds, "start:stop:step or a comma list (mm)");
  eval->add_option("--output", eval_flags.output, "Output directory");
  eval->add_option("--timed-frames", eval_flags.timed_frames, "Batch-1 passes for throughput (0: skip)");
  eval->add_option("--center", eval_flags.center, "Cube center: reference or mass");
  eval->add_option("--cube-size", eval_flags.cube_size, "Crop cube edge (mm)");

  InferFlags infer_flags;
  CLI::App* infer = app.add_subcommand("infer", "Predict joints for a depth file or a manifest");
  infer->add_option("--checkpoint", infer_flags.checkpoint, "Model checkpoint")->required();
  infer->add_option("--input", infer_flags.input, "Depth file or manifest (.jsonl)")->required();
  infer->add_option("--output", infer_flags.output, "Output directory");
  infer->add_option("--center", infer_flags.center, "Cube center for manifests: reference or mass");
  infer->add_option("--cube-size", infer_flags.cube_size, "Crop cube edge (mm)");
  infer->add_option("--fx", infer_flags.fx, "Focal length x (single depth file)");
  infer->add_option("--fy", infer_flags.fy, "Focal length y (single depth file)");
  infer->add_option("--cx", infer_flags.cx, "Principal point x (single depth file)");
  infer->add_option("--cy", infer_flags.cy, "Principal point y (single depth file)");
  infer->add_option("--png-scale-um", infer_flags.png_scale_um, "PNG depth unit in micrometers");

  BenchFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "Measure batch-1 inference throughput");
  bench->add_option("--checkpoint", bench_flags.checkpoint, "Model checkpoint (default: random init)");
  bench->add_option("--model", bench_flags.model, "Width preset without a checkpoint: reference or tiny");
  bench->add_option("--variant", bench_flags.variant, "Variant without a checkpoint");
  bench->add_option("--topology", bench_flags.topology, "Topology preset without a checkpoint");
  bench->add_option("--iterations", bench_flags.iterations, "Timed forward passes");
  bench->add_option("--warmup", bench_flags.warmup, "Untimed warmup passes");
  bench->add_option("--seed", bench_flags.seed, "Root seed");
  bench->add_option("--output", bench_flags.output, "Output directory");

  CLI::App* ablate = app.add_subcommand("ablate", "Train and compare full, two_branch and fc_regression");
  ablate_flags.add(ablate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto args_json = [&](CLI::App* sub) {
    json j = json::object();
    for (const CLI::Option* o : sub->get_options()) {
      if (o->count() > 0 && !o->get_lnames().empty()) j[o->get_lnames().front()] = o->as<std::string>();
    }
    return j;
  };

  if (synth->parsed()) {
    return guarded([&] {
      ExperimentConfig c = synth_flags.resolve("synth");
      return do_synth(c);
    });
  }
  if (train_cmd->parsed()) {
    return guarded([&] {
      const ExperimentConfig c = train_flags.resolve("train");
      if (c.manifest.empty() && c.synth_frames == 0) throw ConfigError("no training data: pass --manifest or --synth-frames");
      if (!c.manifest.empty()) require_manifest(c.manifest);
      prepare_output(c.output, to_json(c));
      return c.train.precision == Precision::f64 ? do_train<double>(c) : do_train<float>(c);
    });
  }
  if (eval->parsed()) {
    return guarded([&] { return do_eval(eval_flags, json{{"command", "eval"}, {"args", args_json(eval)}}); });
  }
  if (infer->parsed()) {
    return guarded([&] {
      if (!fs::exists(infer_flags.checkpoint)) throw ConfigError("checkpoint not found: '" + infer_flags.checkpoint + "'");
      const json resolved{{"command", "infer"}, {"args", args_json(infer)}};
      return read_checkpoint_info(infer_flags.checkpoint).precision == Precision::f64
                 ? do_infer<double>(infer_flags, resolved)
                 : do_infer<float>(infer_flags, resolved);
    });
  }
  if (bench->parsed()) {
    return guarded([&] { return do_bench(bench_flags, json{{"command", "bench"}, {"args", args_json(bench)}}); });
  }
  if (ablate->parsed()) {
    return guarded([&] {
      const ExperimentConfig c = ablate_flags.resolve("ablate");
      prepare_output(c.output, to_json(c));
      return c.train.precision == Precision::f64 ? do_ablate<double>(c) : do_ablate<float>(c);
    });
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"hcrnn"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hcrnn::cli
