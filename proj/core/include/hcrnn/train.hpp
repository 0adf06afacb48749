#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "hcrnn/depth.hpp"
#include "hcrnn/model.hpp"
#include "hcrnn/precision.hpp"

namespace hcrnn {

struct TrainConfig {
  double lr0 = 1e-3;
  std::size_t batch_size = 32;
  double weight_decay = 1e-5;
  double lr_decay = 0.96;
  std::size_t decay_every = 2000;  // iterations
  std::size_t epochs = 120;
  /// Stop after this many iterations; 0 runs all epochs.
  std::size_t max_iterations = 0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  bool augment = true;
  /// Save a checkpoint every N iterations into checkpoint_dir; 0 disables.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  /// Throws ConfigError on non-positive rates, sizes or decay factors.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Unknown keys raise ConfigError; absent keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// lr0 * decay^floor(t / decay_every).
double learning_rate(std::size_t t, const TrainConfig& cfg);

template <typename T>
struct AdamMoments {
  std::vector<T> m, v;
};

/// One Adam update of a parameter array at step t >= 1. Weight decay is
/// decoupled and applied first: p <- p - lr * wd * p. Throws
/// DimensionError when sizes disagree and UsageError for t == 0.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state, std::size_t t,
               const TrainConfig& cfg);

/// Adam over every parameter of a model.
template <typename T>
class Adam {
 public:
  explicit Adam(TrainConfig cfg) : cfg_(std::move(cfg)) {}
  void step(std::vector<NamedParameter<T>>& params);
  std::size_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<AdamMoments<T>> state_;
  std::size_t t_ = 0;
};

struct LossRecord {
  std::size_t iteration = 0;  // 1-based
  std::size_t epoch = 0;      // 0-based
  double total = 0, global = 0, local = 0;
  double lr = 0;
};

void to_json(nlohmann::json& j, const LossRecord& r);

struct TrainResult {
  std::vector<LossRecord> log;
  std::size_t iterations = 0;
  bool stopped_early = false;
};

/// Called after every iteration; returning false ends training.
using TrainCallback = std::function<bool(const LossRecord&)>;

/// [batch x 1 x S x S] patches and [batch x 3T] normalized targets.
template <typename T>
Tensor<T> batch_patches(std::span<const HandSample> samples);
template <typename T>
Tensor<T> batch_targets(std::span<const HandSample> samples);

/// Seeded shuffling per epoch, online augmentation, total loss, backward and
/// Adam. Batches of one trailing sample are skipped (batch norm needs two).
/// Non-finite values abort with NumericError.
template <typename T>
TrainResult train(HcrnnModel<T>& model, std::span<const HandSample> data, const TrainConfig& cfg,
                  const TrainCallback& callback = {});

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace hcrnn
