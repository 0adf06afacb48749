#include <cmath>
#include <set>

#include "hcrnn/error.hpp"
#include "hcrnn/train.hpp"

namespace hcrnn {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(lr0, "lr0");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(lr_decay, "lr_decay");
  positive(static_cast<double>(decay_every), "decay_every");
  if (epochs == 0 && max_iterations == 0) throw ConfigError("epochs and max_iterations are both 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (!(lambda >= 0)) throw ConfigError("lambda must be non-negative");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for batch normalization");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr0", c.lr0},
                     {"batch_size", c.batch_size},
                     {"weight_decay", c.weight_decay},
                     {"lr_decay", c.lr_decay},
                     {"decay_every", c.decay_every},
                     {"epochs", c.epochs},
                     {"max_iterations", c.max_iterations},
                     {"lambda", c.lambda},
                     {"seed", c.seed},
                     {"precision", to_string(c.precision)},
                     {"augment", c.augment},
                     {"checkpoint_every", c.checkpoint_every},
                     {"checkpoint_dir", c.checkpoint_dir.string()}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known{"lr0",    "batch_size", "weight_decay", "lr_decay",  "decay_every",
                                           "epochs", "max_iterations", "lambda",   "seed",      "precision",
                                           "augment", "checkpoint_every", "checkpoint_dir"};
  if (!j.is_object()) throw ConfigError("training config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown training config key '" + key + "'");
  }
  try {
    if (j.contains("lr0")) c.lr0 = j["lr0"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("lr_decay")) c.lr_decay = j["lr_decay"].get<double>();
    if (j.contains("decay_every")) c.decay_every = j["decay_every"].get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("max_iterations")) c.max_iterations = j["max_iterations"].get<std::size_t>();
    if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("precision")) c.precision = parse_precision(j["precision"].get<std::string>());
    if (j.contains("augment")) c.augment = j["augment"].get<bool>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<std::size_t>();
    if (j.contains("checkpoint_dir")) c.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
}

double learning_rate(std::size_t t, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(t / cfg.decay_every));
}

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state, std::size_t t,
               const TrainConfig& cfg) {
  if (t == 0) throw UsageError("adam_step: step counter starts at 1");
  if (grad.size() != param.size()) {
    throw DimensionError("adam_step: " + std::to_string(param.size()) + " parameters but " +
                         std::to_string(grad.size()) + " gradients");
  }
  if (state.m.empty()) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw DimensionError("adam_step: moment buffers sized " + std::to_string(state.m.size()) + " for " +
                         std::to_string(param.size()) + " parameters");
  }
  const double lr = learning_rate(t, cfg);
  const double decay = 1.0 - lr * cfg.weight_decay;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    const double v = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    double p = static_cast<double>(param[i]) * decay;
    p -= lr * (m / c1) / (std::sqrt(v / c2) + kAdamEps);
    param[i] = static_cast<T>(p);
  }
}

template <typename T>
void Adam<T>::step(std::vector<NamedParameter<T>>& params) {
  if (state_.empty()) state_.resize(params.size());
  if (state_.size() != params.size()) throw UsageError("Adam: parameter list changed between steps");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i].value;
    const std::vector<T> g = p.grad();
    adam_step<T>(p.mutable_data(), g, state_[i], t_, cfg_);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamMoments<float>&, std::size_t,
                               const TrainConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamMoments<double>&, std::size_t,
                                const TrainConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace hcrnn
