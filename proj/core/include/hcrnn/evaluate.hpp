#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcrnn/depth.hpp"
#include "hcrnn/model.hpp"
#include "hcrnn/train.hpp"

namespace hcrnn {

struct Throughput {
  std::size_t frames = 0;
  double fps = 0;
  double mean_ms = 0, p50_ms = 0, p99_ms = 0;
};

struct EvalReport {
  std::size_t frames = 0;
  double mean_error_mm = 0;
  std::vector<double> per_joint_error_mm;
  std::vector<std::pair<double, double>> success_curve;  // (threshold mm, fraction)
  Throughput throughput;
};

void to_json(nlohmann::json& j, const Throughput& t);
void to_json(nlohmann::json& j, const EvalReport& r);

/// 0, 2, ..., 80 mm.
std::vector<double> default_thresholds();

/// Frame-major joints, each frame a list of T points in mm. A frame succeeds
/// at threshold d when its largest joint error is <= d. Throws UsageError on
/// an empty set and DimensionError on mismatched shapes.
EvalReport compute_metrics(std::span<const std::vector<Vec3>> predicted, std::span<const std::vector<Vec3>> truth,
                           std::span<const double> thresholds);

/// Nearest-rank percentile of unsorted samples, q in [0, 100].
double percentile(std::vector<double> values, double q);
Throughput summarize_latencies(std::span<const double> seconds);

/// Global predictions of a model, denormalized to mm, one entry per sample.
template <typename T>
std::vector<std::vector<Vec3>> predict_mm(HcrnnModel<T>& model, std::span<const HandSample> samples,
                                          std::size_t batch = 32);

struct EvalOptions {
  std::vector<double> thresholds = default_thresholds();
  std::size_t warmup = 5;
  /// Batch-1 forward passes timed after warmup; 0 skips throughput.
  std::size_t timed_frames = 50;
};

template <typename T>
EvalReport evaluate(HcrnnModel<T>& model, std::span<const HandSample> samples, const EvalOptions& options = {});

/// Timed batch-1 forward passes on cycled samples.
template <typename T>
Throughput measure_throughput(HcrnnModel<T>& model, std::span<const HandSample> samples, std::size_t warmup,
                              std::size_t iterations);

/// Writes report.json plus success_curve.csv (threshold_mm,fraction) in dir.
void write_report(const std::filesystem::path& dir, const EvalReport& report, const nlohmann::json& context = {});

struct AblationRow {
  Variant variant;
  std::size_t parameters = 0;
  EvalReport report;
  double final_loss = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  /// |two_branch - full| / full, when both were run.
  double parity_gap = 0;
  bool parity_ok = true;
  /// full <= fc_regression on mean error; reported, not enforced.
  bool full_beats_fc = false;
};

void to_json(nlohmann::json& j, const AblationReport& r);

/// Trains each variant from the same seed on the same data and evaluates
/// it on `eval_data`.
template <typename T>
AblationReport run_ablation(std::span<const Variant> variants, const ModelConfig& config,
                            const JointTopology& topology, std::span<const HandSample> train_data,
                            std::span<const HandSample> eval_data, const TrainConfig& cfg,
                            const EvalOptions& options = {});

}  // namespace hcrnn
