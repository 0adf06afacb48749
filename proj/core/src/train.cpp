#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hcrnn/checkpoint.hpp"
#include "hcrnn/error.hpp"
#include "hcrnn/loss.hpp"
#include "hcrnn/train.hpp"

namespace hcrnn {

void to_json(nlohmann::json& j, const LossRecord& r) {
  j = nlohmann::json{{"iteration", r.iteration}, {"epoch", r.epoch}, {"total", r.total},
                     {"global", r.global},       {"local", r.local}, {"lr", r.lr}};
}

template <typename T>
Tensor<T> batch_patches(std::span<const HandSample> samples) {
  if (samples.empty()) throw UsageError("batch_patches: empty batch");
  const std::size_t s = samples.front().size;
  std::vector<T> data;
  data.reserve(samples.size() * s * s);
  for (const HandSample& h : samples) {
    if (h.size != s || h.patch.size() != s * s) throw DimensionError("batch_patches: mixed patch sizes");
    for (double v : h.patch) data.push_back(static_cast<T>(v));
  }
  return Tensor<T>(Shape{samples.size(), 1, s, s}, std::move(data));
}

template <typename T>
Tensor<T> batch_targets(std::span<const HandSample> samples) {
  if (samples.empty()) throw UsageError("batch_targets: empty batch");
  const std::size_t n = samples.front().joints_norm.size();
  std::vector<T> data;
  data.reserve(samples.size() * n);
  for (const HandSample& h : samples) {
    if (h.joints_norm.size() != n) throw DimensionError("batch_targets: mixed joint counts");
    for (double v : h.joints_norm) data.push_back(static_cast<T>(v));
  }
  return Tensor<T>(Shape{samples.size(), n}, std::move(data));
}

template <typename T>
TrainResult train(HcrnnModel<T>& model, std::span<const HandSample> data, const TrainConfig& cfg,
                  const TrainCallback& callback) {
  cfg.validate();
  if (data.size() < 2) throw UsageError("train: need at least 2 samples, got " + std::to_string(data.size()));
  const std::size_t joints = model.topology().total_joints();
  for (const HandSample& h : data) {
    if (h.joints_norm.size() != 3 * joints) {
      throw ValidationError("train: sample has " + std::to_string(h.joints_norm.size() / 3) +
                            " joints, model topology has " + std::to_string(joints));
    }
  }
  if (cfg.checkpoint_every > 0) std::filesystem::create_directories(cfg.checkpoint_dir);

  Rng order_rng(derive_seed(cfg.seed, "data"));
  Rng aug_rng(derive_seed(cfg.seed, "augment"));
  Adam<T> opt(cfg);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::vector<HandSample> batch;
  const std::size_t epochs = cfg.epochs == 0 ? static_cast<std::size_t>(-1) : cfg.epochs;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start + 1 < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const HandSample& s = data[order[i]];
        batch.push_back(cfg.augment ? apply_augment(s, draw_augment(aug_rng)) : s);
      }
      const Tensor<T> x = batch_patches<T>(batch);
      const Tensor<T> y = batch_targets<T>(batch);

      LossRecord rec;
      model.zero_grad();
      {
        Tape<T> tape;
        PoseOutput<T> out = model.forward(x, Mode::train);
        LossTerms<T> loss = total_loss(out, y, model.topology(), static_cast<T>(cfg.lambda));
        rec.total = loss.total.item();
        rec.global = loss.global.item();
        rec.local = loss.local.item();
        backward(loss.total);
      }
      opt.step(model.parameters());
      rec.iteration = opt.steps();
      rec.epoch = epoch;
      rec.lr = learning_rate(rec.iteration, cfg);
      result.log.push_back(rec);
      result.iterations = rec.iteration;

      if (cfg.checkpoint_every > 0 && rec.iteration % cfg.checkpoint_every == 0) {
        char name[40];
        std::snprintf(name, sizeof name, "checkpoint_%06zu.bin", rec.iteration);
        save_model(model, cfg.checkpoint_dir / name, nlohmann::json{{"iteration", rec.iteration}});
      }
      if (callback && !callback(rec)) {
        result.stopped_early = true;
        return result;
      }
      if (cfg.max_iterations > 0 && rec.iteration >= cfg.max_iterations) return result;
    }
  }
  return result;
}

template Tensor<float> batch_patches<float>(std::span<const HandSample>);
template Tensor<double> batch_patches<double>(std::span<const HandSample>);
template Tensor<float> batch_targets<float>(std::span<const HandSample>);
template Tensor<double> batch_targets<double>(std::span<const HandSample>);
template TrainResult train<float>(HcrnnModel<float>&, std::span<const HandSample>, const TrainConfig&,
                                  const TrainCallback&);
template TrainResult train<double>(HcrnnModel<double>&, std::span<const HandSample>, const TrainConfig&,
                                   const TrainCallback&);

}  // namespace hcrnn
