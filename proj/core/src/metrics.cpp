#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hcrnn/error.hpp"
#include "hcrnn/evaluate.hpp"

namespace hcrnn {

void to_json(nlohmann::json& j, const Throughput& t) {
  j = nlohmann::json{{"frames", t.frames}, {"fps", t.fps}, {"mean_ms", t.mean_ms}, {"p50_ms", t.p50_ms},
                     {"p99_ms", t.p99_ms}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [thr, frac] : r.success_curve) curve.push_back({thr, frac});
  j = nlohmann::json{{"frames", r.frames},
                     {"mean_error_mm", r.mean_error_mm},
                     {"per_joint_error_mm", r.per_joint_error_mm},
                     {"success_curve", curve},
                     {"throughput", r.throughput}};
}

std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int t = 0; t <= 80; t += 2) out.push_back(t);
  return out;
}

EvalReport compute_metrics(std::span<const std::vector<Vec3>> predicted, std::span<const std::vector<Vec3>> truth,
                           std::span<const double> thresholds) {
  if (predicted.empty()) throw UsageError("evaluate: no frames");
  if (predicted.size() != truth.size()) {
    throw DimensionError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " ground-truth frames");
  }
  const std::size_t joints = truth.front().size();
  if (joints == 0) throw DimensionError("evaluate: frames without joints");
  std::vector<double> sum(joints, 0.0);
  std::vector<double> worst(predicted.size(), 0.0);
  for (std::size_t f = 0; f < predicted.size(); ++f) {
    if (predicted[f].size() != joints || truth[f].size() != joints) {
      throw DimensionError("evaluate: frame " + std::to_string(f) + " has " + std::to_string(predicted[f].size()) +
                           " predicted and " + std::to_string(truth[f].size()) + " true joints, expected " +
                           std::to_string(joints));
    }
    for (std::size_t j = 0; j < joints; ++j) {
      const double dx = predicted[f][j][0] - truth[f][j][0];
      const double dy = predicted[f][j][1] - truth[f][j][1];
      const double dz = predicted[f][j][2] - truth[f][j][2];
      const double e = std::sqrt(dx * dx + dy * dy + dz * dz);
      sum[j] += e;
      worst[f] = std::max(worst[f], e);
    }
  }
  EvalReport r;
  r.frames = predicted.size();
  const double n = static_cast<double>(predicted.size());
  r.per_joint_error_mm.resize(joints);
  for (std::size_t j = 0; j < joints; ++j) r.per_joint_error_mm[j] = sum[j] / n;
  r.mean_error_mm = std::accumulate(r.per_joint_error_mm.begin(), r.per_joint_error_mm.end(), 0.0) /
                    static_cast<double>(joints);
  std::vector<double> sorted_thr(thresholds.begin(), thresholds.end());
  std::sort(sorted_thr.begin(), sorted_thr.end());
  for (double thr : sorted_thr) {
    const auto ok = std::count_if(worst.begin(), worst.end(), [thr](double w) { return w <= thr; });
    r.success_curve.emplace_back(thr, static_cast<double>(ok) / n);
  }
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank < 1 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

Throughput summarize_latencies(std::span<const double> seconds) {
  Throughput t;
  if (seconds.empty()) return t;
  std::vector<double> ms;
  for (double s : seconds) ms.push_back(s * 1e3);
  t.frames = ms.size();
  t.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  t.p50_ms = percentile(ms, 50);
  t.p99_ms = percentile(ms, 99);
  t.fps = t.mean_ms > 0 ? 1e3 / t.mean_ms : 0;
  return t;
}

void write_report(const std::filesystem::path& dir, const EvalReport& report, const nlohmann::json& context) {
  std::filesystem::create_directories(dir);
  nlohmann::json j = report;
  if (!context.is_null()) j["context"] = context;
  std::ofstream out(dir / "report.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  std::ofstream csv(dir / "success_curve.csv", std::ios::trunc);
  csv.precision(12);
  csv << "threshold_mm,fraction\n";
  for (const auto& [thr, frac] : report.success_curve) csv << thr << ',' << frac << '\n';
  if (!out || !csv) throw FormatError("cannot write report files in '" + dir.string() + "'");
}

}  // namespace hcrnn
