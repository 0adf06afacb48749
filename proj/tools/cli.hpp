#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hcrnn/depth.hpp"
#include "hcrnn/model.hpp"
#include "hcrnn/topology.hpp"
#include "hcrnn/train.hpp"

namespace hcrnn::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

/// Everything a run needs. Loaded from a JSON document whose keys mirror
/// the fields below; unknown keys are rejected.
struct ExperimentConfig {
  JointTopology topology = JointTopology::preset("msra");
  Variant variant = Variant::full;
  std::string model = "reference";  // "reference", "tiny" or "custom"
  ModelConfig model_config = ModelConfig::reference();
  TrainConfig train;
  std::filesystem::path manifest;
  std::size_t synth_frames = 0;
  double synth_noise_mm = 0;
  std::size_t synth_subjects = 1;
  std::filesystem::path output;
  std::uint64_t seed = 0;
  double cube_size = 300;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Throws ConfigError on unknown keys or bad values.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// $HCRNN_OUTPUT_ROOT/<command>, or runs/<command> when unset.
std::filesystem::path default_output(const std::string& command);

/// Deterministic synthetic frames for a root seed.
std::vector<RawFrame> synth_frames(std::size_t count, const JointTopology& topology, std::uint64_t seed,
                                   double noise_mm = 0, std::size_t subjects = 1);

/// Parses "0:80:2" (start:stop:step, inclusive) or "5,10,20".
std::vector<double> parse_thresholds(const std::string& text);

/// Entry point of the hcrnn tool; returns the process exit status.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace hcrnn::cli
