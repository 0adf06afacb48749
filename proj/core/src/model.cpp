#include "hcrnn/model.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "hcrnn/rng.hpp"

namespace hcrnn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full:
      return "full";
    case Variant::two_branch:
      return "two_branch";
    case Variant::fc_regression:
      return "fc_regression";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "two_branch") return Variant::two_branch;
  if (name == "fc_regression") return Variant::fc_regression;
  throw ConfigError("unknown model variant '" + std::string(name) + "' (expected full, two_branch or fc_regression)");
}

ModelConfig ModelConfig::reference() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.encoder_channels = {8, 8, 16, 32, 32};
  c.branch_width = 16;
  c.ensemble_width = 64;
  return c;
}

namespace model_detail {

template <typename T>
struct Conv {
  Tensor<T> weight, bias;
  std::size_t padding = 0;

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, 1, padding); }
};

template <typename T>
struct Dense {
  Tensor<T> weight, bias;

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

template <typename T>
struct Norm {
  Tensor<T> gamma, beta;
  BatchNormStats<T> stats;

  Tensor<T> operator()(const Tensor<T>& x, Mode mode) { return batch_norm(x, gamma, beta, stats, mode); }
};

// Full pre-activation: BN -> ReLU -> conv, twice, plus a 1x1 projection shortcut.
template <typename T>
struct ResidualBlock {
  Norm<T> bn1;
  Conv<T> conv1;
  Norm<T> bn2;
  Conv<T> conv2;
  Conv<T> shortcut;
  bool pool_after = false;
};

template <typename T>
struct BranchHead {
  Conv<T> conv;
  Norm<T> bn;
};

template <typename T>
struct PalmBranch {
  std::vector<Dense<T>> hidden;
  Dense<T> out;
};

template <typename T>
struct RecurrentFinger {
  std::vector<Dense<T>> joint_fc;
  GruParams<T> gru;
};

template <typename T>
struct FcFinger {
  Dense<T> hidden;
  Dense<T> out;
};

template <typename T>
struct Ensemble {
  Dense<T> hidden;
  Dense<T> out;
};

template <typename T>
class Builder {
 public:
  Builder(bool allocate, std::uint64_t seed) : allocate_(allocate), rng_(seed) {}

  Tensor<T> uniform(const std::string& name, Shape shape, double bound) {
    return add(name, std::move(shape), [&](Tensor<T>& t) { fill_uniform(t.mutable_data(), bound, rng_); });
  }
  Tensor<T> constant(const std::string& name, Shape shape, T value) {
    return add(name, std::move(shape), [&](Tensor<T>& t) {
      for (T& v : t.mutable_data()) v = value;
    });
  }

  Conv<T> conv(const std::string& prefix, std::size_t c_in, std::size_t c_out, std::size_t k) {
    const double bound = std::sqrt(1.0 / static_cast<double>(c_in * k * k));
    Conv<T> c;
    c.weight = uniform(prefix + ".weight", {c_out, c_in, k, k}, bound);
    c.bias = constant(prefix + ".bias", {c_out}, T(0));
    c.padding = k / 2;
    return c;
  }
  Dense<T> dense(const std::string& prefix, std::size_t d_in, std::size_t d_out) {
    const double bound = std::sqrt(1.0 / static_cast<double>(d_in));
    Dense<T> d;
    d.weight = uniform(prefix + ".weight", {d_out, d_in}, bound);
    d.bias = constant(prefix + ".bias", {d_out}, T(0));
    return d;
  }
  Norm<T> norm(const std::string& prefix, std::size_t channels) {
    Norm<T> n;
    n.gamma = constant(prefix + ".gamma", {channels}, T(1));
    n.beta = constant(prefix + ".beta", {channels}, T(0));
    n.stats = BatchNormStats<T>(channels);
    return n;
  }
  GruParams<T> gru(const std::string& prefix, std::size_t d_in, std::size_t d_h, std::size_t d_out) {
    const double bound = std::sqrt(1.0 / static_cast<double>(d_h));
    GruParams<T> g;
    g.w_r = uniform(prefix + ".W_r", {d_h, d_in}, bound);
    g.w_z = uniform(prefix + ".W_z", {d_h, d_in}, bound);
    g.w_h = uniform(prefix + ".W_h", {d_h, d_in}, bound);
    g.u_r = uniform(prefix + ".U_r", {d_h, d_h}, bound);
    g.u_z = uniform(prefix + ".U_z", {d_h, d_h}, bound);
    g.u_h = uniform(prefix + ".U_h", {d_h, d_h}, bound);
    g.b_r = constant(prefix + ".b_r", {d_h}, T(0));
    g.b_z = constant(prefix + ".b_z", {d_h}, T(0));
    g.b_h = constant(prefix + ".b_h", {d_h}, T(0));
    g.w_y = uniform(prefix + ".W_y", {d_out, d_h}, bound);
    g.b_y = constant(prefix + ".b_y", {d_out}, T(0));
    return g;
  }

  std::size_t count() const { return count_; }
  std::vector<NamedParameter<T>> take() { return std::move(params_); }

 private:
  template <typename Init>
  Tensor<T> add(const std::string& name, Shape shape, Init init) {
    count_ += shape_numel(shape);
    if (!allocate_) return {};
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    init(t);
    t.set_name(name).set_requires_grad(true);
    params_.push_back({name, t});
    return t;
  }

  bool allocate_;
  Rng rng_;
  std::size_t count_ = 0;
  std::vector<NamedParameter<T>> params_;
};

std::string branch_name(Variant variant, std::size_t branch) {
  if (branch == 0) return "palm";
  if (variant == Variant::two_branch) return "fingers";
  return std::string(kFingerNames[branch - 1]);
}

template <typename T>
struct Network {
  ModelConfig config;
  JointTopology topology;
  Variant variant = Variant::full;
  std::size_t finger_width = 0;

  std::vector<ResidualBlock<T>> blocks;
  std::vector<BranchHead<T>> heads;
  PalmBranch<T> palm;
  std::vector<RecurrentFinger<T>> fingers;  // full: one per finger; two_branch: single unified chain
  std::vector<FcFinger<T>> fc_fingers;
  Ensemble<T> ensemble;

  std::vector<NamedParameter<T>> params;
  std::vector<NamedBatchNorm<T>> norms;

  void build(Builder<T>& b);
  void index_batch_norms();
};

}  // namespace model_detail

using namespace model_detail;

template <typename T>
struct HcrnnModel<T>::Impl : Network<T> {};

template <typename T>
void Network<T>::build(Builder<T>& b) {
  const std::size_t w = config.branch_width;
  finger_width = w;
  if (variant == Variant::two_branch) {
    finger_width = config.two_branch_width != 0 ? config.two_branch_width : tune_two_branch_width(config, topology);
  }

  std::size_t c_in = 1;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    const std::size_t c_out = config.encoder_channels[i];
    const std::string p = "encoder.block" + std::to_string(i + 1);
    ResidualBlock<T> blk;
    blk.bn1 = b.norm(p + ".bn1", c_in);
    blk.conv1 = b.conv(p + ".conv1", c_in, c_out, 3);
    blk.bn2 = b.norm(p + ".bn2", c_out);
    blk.conv2 = b.conv(p + ".conv2", c_out, c_out, 3);
    blk.shortcut = b.conv(p + ".shortcut", c_in, c_out, 1);
    blk.pool_after = kPoolAfterBlock[i];
    blocks.push_back(std::move(blk));
    c_in = c_out;
  }

  const std::size_t n_branches = variant == Variant::two_branch ? 2 : 1 + kFingerCount;
  for (std::size_t k = 0; k < n_branches; ++k) {
    const std::string p = "head." + branch_name(variant, k);
    const std::size_t width = k == 0 ? w : finger_width;
    heads.push_back(BranchHead<T>{b.conv(p + ".conv", c_in, width, 3), b.norm(p + ".bn", width)});
  }

  std::size_t d = w;
  for (std::size_t i = 0; i < config.palm_hidden_layers; ++i) {
    palm.hidden.push_back(b.dense("palm.fc" + std::to_string(i + 1), d, w));
    d = w;
  }
  palm.out = b.dense("palm.out", d, 3 * topology.palm_count());

  std::size_t ensemble_in = w;
  switch (variant) {
    case Variant::full:
      for (std::size_t k = 0; k < kFingerCount; ++k) {
        const std::string p = "finger." + std::string(kFingerNames[k]);
        RecurrentFinger<T> f;
        for (std::size_t n = 0; n < topology.fingers[k].length(); ++n) {
          f.joint_fc.push_back(b.dense(p + ".fc" + std::to_string(n + 1), w, w));
        }
        f.gru = b.gru(p + ".gru", w, w, 3);
        fingers.push_back(std::move(f));
        ensemble_in += w;
      }
      break;
    case Variant::fc_regression:
      for (std::size_t k = 0; k < kFingerCount; ++k) {
        const std::string p = "finger." + std::string(kFingerNames[k]);
        fc_fingers.push_back(
            FcFinger<T>{b.dense(p + ".fc", w, w), b.dense(p + ".out", w, 3 * topology.fingers[k].length())});
        ensemble_in += w;
      }
      break;
    case Variant::two_branch: {
      RecurrentFinger<T> f;
      for (std::size_t n = 0; n < topology.max_chain_length(); ++n) {
        f.joint_fc.push_back(b.dense("fingers.fc" + std::to_string(n + 1), finger_width, finger_width));
      }
      f.gru = b.gru("fingers.gru", finger_width, finger_width, 3 * kFingerCount);
      fingers.push_back(std::move(f));
      ensemble_in += finger_width;
      break;
    }
  }
  ensemble.hidden = b.dense("ensemble.fc1", ensemble_in, config.ensemble_width);
  ensemble.out = b.dense("ensemble.out", config.ensemble_width, 3 * topology.total_joints());
}

template <typename T>
void Network<T>::index_batch_norms() {
  norms.clear();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "encoder.block" + std::to_string(i + 1);
    norms.push_back({p + ".bn1", &blocks[i].bn1.stats});
    norms.push_back({p + ".bn2", &blocks[i].bn2.stats});
  }
  for (std::size_t k = 0; k < heads.size(); ++k) {
    norms.push_back({"head." + branch_name(variant, k) + ".bn", &heads[k].bn.stats});
  }
}

std::size_t count_parameters(const ModelConfig& config, const JointTopology& topology, Variant variant) {
  ModelConfig c = config;
  if (variant == Variant::two_branch && c.two_branch_width == 0) c.two_branch_width = tune_two_branch_width(c, topology);
  Network<float> impl;
  impl.config = c;
  impl.topology = topology;
  impl.variant = variant;
  Builder<float> b(false, 0);
  impl.build(b);
  return b.count();
}

std::size_t tune_two_branch_width(const ModelConfig& config, const JointTopology& topology) {
  const auto target = static_cast<long long>(count_parameters(config, topology, Variant::full));
  std::size_t best = config.branch_width;
  long long best_gap = std::numeric_limits<long long>::max();
  for (std::size_t width = 1; width <= 8 * config.branch_width; ++width) {
    ModelConfig c = config;
    c.two_branch_width = width;
    const auto n = static_cast<long long>(count_parameters(c, topology, Variant::two_branch));
    const long long gap = std::llabs(n - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = width;
    }
    if (n > target) break;  // count grows monotonically with width
  }
  return best;
}

template <typename T>
HcrnnModel<T>::HcrnnModel(ModelConfig config, JointTopology topology, Variant variant, std::uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
  topology.validate();
  if (config.input_size == 0 || config.input_size % 8 != 0) {
    throw ConfigError("input size must be a positive multiple of 8, got " + std::to_string(config.input_size));
  }
  for (std::size_t c : config.encoder_channels) {
    if (c == 0) throw ConfigError("encoder channel count must be positive");
  }
  if (config.branch_width == 0 || config.ensemble_width == 0) throw ConfigError("branch widths must be positive");
  impl_->config = config;
  impl_->topology = std::move(topology);
  impl_->variant = variant;
  Builder<T> b(true, seed);
  impl_->build(b);
  impl_->params = b.take();
  impl_->index_batch_norms();
}

template <typename T>
HcrnnModel<T>::~HcrnnModel() = default;
template <typename T>
HcrnnModel<T>::HcrnnModel(HcrnnModel&&) noexcept = default;
template <typename T>
HcrnnModel<T>& HcrnnModel<T>::operator=(HcrnnModel&&) noexcept = default;

template <typename T>
const ModelConfig& HcrnnModel<T>::config() const {
  return impl_->config;
}
template <typename T>
const JointTopology& HcrnnModel<T>::topology() const {
  return impl_->topology;
}
template <typename T>
Variant HcrnnModel<T>::variant() const {
  return impl_->variant;
}
template <typename T>
std::size_t HcrnnModel<T>::finger_width() const {
  return impl_->finger_width;
}
template <typename T>
std::size_t HcrnnModel<T>::branch_count() const {
  return impl_->heads.size();
}

template <typename T>
Tensor<T> HcrnnModel<T>::encode(const Tensor<T>& depth, Mode mode) {
  const std::size_t s = impl_->config.input_size;
  const bool single = depth.rank() == 3;
  if (!(depth.rank() == 4 || single) || depth.dim(depth.rank() - 3) != 1 || depth.dim(depth.rank() - 2) != s ||
      depth.dim(depth.rank() - 1) != s) {
    throw DimensionError("encode: expected [batch x 1 x " + std::to_string(s) + " x " + std::to_string(s) +
                         "] depth input, got " + shape_str(depth.shape()));
  }
  Tensor<T> h = single ? reshape(depth, {1, 1, s, s}) : depth;
  for (ResidualBlock<T>& blk : impl_->blocks) {
    Tensor<T> a = blk.conv1(relu(blk.bn1(h, mode)));
    a = blk.conv2(relu(blk.bn2(a, mode)));
    h = add(a, blk.shortcut(h));
    if (blk.pool_after) h = avg_pool2d(h);
  }
  if (single) h = reshape(h, Shape(h.shape().begin() + 1, h.shape().end()));
  return h;
}

template <typename T>
Tensor<T> HcrnnModel<T>::branch_head(std::size_t branch, const Tensor<T>& encoded, Mode mode) {
  if (branch >= impl_->heads.size()) {
    throw ConfigError("branch " + std::to_string(branch) + " out of range for " + std::to_string(impl_->heads.size()) +
                      " branches");
  }
  const bool single = encoded.rank() == 3;
  Tensor<T> x = single ? reshape(encoded, {1, encoded.dim(0), encoded.dim(1), encoded.dim(2)}) : encoded;
  BranchHead<T>& head = impl_->heads[branch];
  Tensor<T> f = global_avg_pool(relu(head.bn(head.conv(x), mode)));
  return single ? reshape(f, {f.dim(1)}) : f;
}

template <typename T>
BranchPrediction<T> HcrnnModel<T>::palm_branch(const Tensor<T>& palm_feature) {
  Tensor<T> h = palm_feature;
  for (const Dense<T>& fc : impl_->palm.hidden) h = relu(fc(h));
  return {impl_->palm.out(h), h};
}

template <typename T>
std::vector<Tensor<T>> HcrnnModel<T>::joint_features(std::size_t finger, const Tensor<T>& finger_feature) {
  if (impl_->variant != Variant::full) throw UsageError("joint_features: six-branch variant only");
  if (finger >= kFingerCount) throw ConfigError("finger index " + std::to_string(finger) + " out of range");
  std::vector<Tensor<T>> seq;
  for (const Dense<T>& fc : impl_->fingers[finger].joint_fc) seq.push_back(relu(fc(finger_feature)));
  return seq;
}

template <typename T>
BranchPrediction<T> HcrnnModel<T>::finger_regress(std::size_t finger, std::span<const Tensor<T>> joint_features) {
  if (impl_->variant != Variant::full) throw UsageError("finger_regress: six-branch variant only");
  if (finger >= kFingerCount) throw ConfigError("finger index " + std::to_string(finger) + " out of range");
  const std::size_t n = impl_->topology.fingers[finger].length();
  if (joint_features.size() != n) {
    throw ConfigError("finger '" + std::string(kFingerNames[finger]) + "' expects " + std::to_string(n) +
                      " joint features, got " + std::to_string(joint_features.size()));
  }
  GruSequence<T> seq = gru_unroll(impl_->fingers[finger].gru, joint_features);
  const std::size_t axis = seq.outputs.front().rank() - 1;
  return {concat(seq.outputs, axis), seq.final_state.h};
}

template <typename T>
BranchPrediction<T> HcrnnModel<T>::finger_branch(std::size_t finger, const Tensor<T>& finger_feature) {
  if (finger >= kFingerCount) throw ConfigError("finger index " + std::to_string(finger) + " out of range");
  switch (impl_->variant) {
    case Variant::full: {
      std::vector<Tensor<T>> seq = joint_features(finger, finger_feature);
      return finger_regress(finger, seq);
    }
    case Variant::fc_regression: {
      const FcFinger<T>& f = impl_->fc_fingers[finger];
      Tensor<T> g = relu(f.hidden(finger_feature));
      return {f.out(g), g};
    }
    case Variant::two_branch:
      break;
  }
  throw UsageError("finger_branch: the two-branch baseline regresses all fingers jointly");
}

template <typename T>
Tensor<T> HcrnnModel<T>::ensemble(const Tensor<T>& palm_feature, std::span<const Tensor<T>> finger_features) {
  const std::size_t expected = impl_->variant == Variant::two_branch ? 1 : kFingerCount;
  if (finger_features.size() != expected) {
    throw ConfigError("ensemble expects " + std::to_string(expected) + " finger features, got " +
                      std::to_string(finger_features.size()));
  }
  std::vector<Tensor<T>> parts{palm_feature};
  parts.insert(parts.end(), finger_features.begin(), finger_features.end());
  Tensor<T> joined = concat(parts, palm_feature.rank() - 1);
  return impl_->ensemble.out(relu(impl_->ensemble.hidden(joined)));
}

template <typename T>
PoseOutput<T> HcrnnModel<T>::forward(const Tensor<T>& depth, Mode mode) {
  Tensor<T> encoded = encode(depth, mode);
  PoseOutput<T> out;
  BranchPrediction<T> palm = palm_branch(branch_head(0, encoded, mode));
  out.palm = palm.joints;
  std::vector<Tensor<T>> states;
  if (impl_->variant == Variant::two_branch) {
    Tensor<T> f = branch_head(1, encoded, mode);
    RecurrentFinger<T>& chain = impl_->fingers.front();
    std::vector<Tensor<T>> seq;
    for (const Dense<T>& fc : chain.joint_fc) seq.push_back(relu(fc(f)));
    GruSequence<T> rolled = gru_unroll(chain.gru, std::span<const Tensor<T>>(seq));
    const std::size_t axis = rolled.outputs.front().rank() - 1;
    for (std::size_t k = 0; k < kFingerCount; ++k) {
      std::vector<Tensor<T>> joints;
      for (std::size_t n = 0; n < impl_->topology.fingers[k].length(); ++n) {
        joints.push_back(slice(rolled.outputs[n], axis, 3 * k, 3 * k + 3));
      }
      out.fingers[k] = concat(joints, axis);
    }
    states.push_back(rolled.final_state.h);
  } else {
    for (std::size_t k = 0; k < kFingerCount; ++k) {
      BranchPrediction<T> pred = finger_branch(k, branch_head(k + 1, encoded, mode));
      out.fingers[k] = pred.joints;
      states.push_back(pred.feature);
    }
  }
  out.global = ensemble(palm.feature, states);
  return out;
}

template <typename T>
std::vector<NamedParameter<T>>& HcrnnModel<T>::parameters() {
  return impl_->params;
}
template <typename T>
const std::vector<NamedParameter<T>>& HcrnnModel<T>::parameters() const {
  return impl_->params;
}

template <typename T>
Tensor<T>& HcrnnModel<T>::parameter(std::string_view name) {
  for (NamedParameter<T>& p : impl_->params) {
    if (p.name == name) return p.value;
  }
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::vector<NamedBatchNorm<T>>& HcrnnModel<T>::batch_norms() {
  return impl_->norms;
}
template <typename T>
const std::vector<NamedBatchNorm<T>>& HcrnnModel<T>::batch_norms() const {
  return impl_->norms;
}

template <typename T>
std::size_t HcrnnModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const NamedParameter<T>& p : impl_->params) n += p.value.numel();
  return n;
}

template <typename T>
void HcrnnModel<T>::zero_grad() {
  for (NamedParameter<T>& p : impl_->params) p.value.zero_grad();
}

template <typename T>
GruParams<T>& HcrnnModel<T>::finger_gru(std::size_t finger) {
  if (impl_->variant != Variant::full) throw UsageError("finger_gru: six-branch variant only");
  if (finger >= kFingerCount) throw ConfigError("finger index " + std::to_string(finger) + " out of range");
  return impl_->fingers[finger].gru;
}

template class HcrnnModel<float>;
template class HcrnnModel<double>;

}  // namespace hcrnn
