#include <cmath>

#include "hcrnn/error.hpp"
#include "hcrnn/evaluate.hpp"

namespace hcrnn {

void to_json(nlohmann::json& j, const AblationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& row : r.rows) {
    rows.push_back({{"variant", to_string(row.variant)},
                    {"parameters", row.parameters},
                    {"mean_error_mm", row.report.mean_error_mm},
                    {"final_loss", row.final_loss},
                    {"report", row.report}});
  }
  j = nlohmann::json{{"rows", rows},
                     {"parity_gap", r.parity_gap},
                     {"parity_ok", r.parity_ok},
                     {"full_beats_fc_regression", r.full_beats_fc}};
}

template <typename T>
AblationReport run_ablation(std::span<const Variant> variants, const ModelConfig& config,
                            const JointTopology& topology, std::span<const HandSample> train_data,
                            std::span<const HandSample> eval_data, const TrainConfig& cfg,
                            const EvalOptions& options) {
  if (variants.empty()) throw UsageError("ablation: no variants");
  AblationReport out;
  const std::uint64_t init_seed = derive_seed(cfg.seed, "init");
  for (Variant v : variants) {
    HcrnnModel<T> model(config, topology, v, init_seed);
    const TrainResult tr = train(model, train_data, cfg);
    AblationRow row;
    row.variant = v;
    row.parameters = model.parameter_count();
    row.final_loss = tr.log.empty() ? 0.0 : tr.log.back().total;
    row.report = evaluate(model, eval_data, options);
    out.rows.push_back(std::move(row));
  }
  const AblationRow* full = nullptr;
  const AblationRow* two = nullptr;
  const AblationRow* fc = nullptr;
  for (const AblationRow& r : out.rows) {
    if (r.variant == Variant::full) full = &r;
    if (r.variant == Variant::two_branch) two = &r;
    if (r.variant == Variant::fc_regression) fc = &r;
  }
  if (full && two) {
    out.parity_gap = std::abs(static_cast<double>(two->parameters) - static_cast<double>(full->parameters)) /
                     static_cast<double>(full->parameters);
    out.parity_ok = out.parity_gap <= 0.10;
  }
  if (full && fc) out.full_beats_fc = full->report.mean_error_mm <= fc->report.mean_error_mm;
  return out;
}

template AblationReport run_ablation<float>(std::span<const Variant>, const ModelConfig&, const JointTopology&,
                                            std::span<const HandSample>, std::span<const HandSample>,
                                            const TrainConfig&, const EvalOptions&);
template AblationReport run_ablation<double>(std::span<const Variant>, const ModelConfig&, const JointTopology&,
                                             std::span<const HandSample>, std::span<const HandSample>,
                                             const TrainConfig&, const EvalOptions&);

}  // namespace hcrnn
