#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcrnn/gru.hpp"
#include "hcrnn/ops.hpp"
#include "hcrnn/tensor.hpp"
#include "hcrnn/topology.hpp"

namespace hcrnn {

/// Architecture variants: the six-branch network and the two ablation baselines.
enum class Variant { full, two_branch, fc_regression };

std::string_view to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);

/// Widths of the network. `reference()` is the full-width architecture; `tiny()`
/// keeps the 96x96 input and the topology but shrinks every width so that
/// finite-difference checks and desk-scale training are feasible.
struct ModelConfig {
  std::array<std::size_t, 5> encoder_channels{64, 64, 128, 256, 256};
  std::size_t input_size = 96;
  /// Branch head channels, finger/palm FC widths and GRU hidden size.
  std::size_t branch_width = 256;
  std::size_t ensemble_width = 1024;
  std::size_t palm_hidden_layers = 2;
  /// Finger-branch width of the two-branch baseline; 0 selects the width
  /// whose total parameter count is closest to the six-branch network.
  std::size_t two_branch_width = 0;

  static ModelConfig reference();
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

/// Average pooling follows encoder blocks 1-3 only.
inline constexpr std::array<bool, 5> kPoolAfterBlock = {true, true, true, false, false};

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
struct NamedBatchNorm {
  std::string name;
  BatchNormStats<T>* stats;
};

/// Palm, per-finger local and global predictions, each [batch x 3*joints]
/// in normalized cube coordinates.
template <typename T>
struct PoseOutput {
  Tensor<T> global;
  Tensor<T> palm;
  std::array<Tensor<T>, kFingerCount> fingers;
};

template <typename T>
struct BranchPrediction {
  Tensor<T> joints;   // [batch x 3N]
  Tensor<T> feature;  // feature handed to the ensemble
};

template <typename T>
class HcrnnModel {
 public:
  HcrnnModel(ModelConfig config, JointTopology topology, Variant variant, std::uint64_t seed);
  ~HcrnnModel();
  HcrnnModel(HcrnnModel&&) noexcept;
  HcrnnModel& operator=(HcrnnModel&&) noexcept;

  const ModelConfig& config() const;
  const JointTopology& topology() const;
  Variant variant() const;
  /// Actual finger-branch width of the two-branch baseline (branch_width otherwise).
  std::size_t finger_width() const;
  /// Number of branches: 6, or 2 for the two-branch baseline.
  std::size_t branch_count() const;

  /// [batch x 1 x S x S] (or [1 x S x S]) depth patches -> pose.
  PoseOutput<T> forward(const Tensor<T>& depth, Mode mode);

  /// [batch x 1 x S x S] -> [batch x C x S/8 x S/8]; rank-3 input gives rank-3 output.
  Tensor<T> encode(const Tensor<T>& depth, Mode mode);
  /// 3x3 conv + BN + ReLU + global average pooling; branch 0 is the palm.
  Tensor<T> branch_head(std::size_t branch, const Tensor<T>& encoded, Mode mode);
  BranchPrediction<T> palm_branch(const Tensor<T>& palm_feature);
  /// Six-branch and FC-regression variants only; finger in [0, 5).
  BranchPrediction<T> finger_branch(std::size_t finger, const Tensor<T>& finger_feature);
  /// The N per-joint features f^(1..N) of one finger (six-branch variant).
  std::vector<Tensor<T>> joint_features(std::size_t finger, const Tensor<T>& finger_feature);
  /// GRU over a joint-feature sequence plus the shared readout; `feature`
  /// is the final hidden state.
  BranchPrediction<T> finger_regress(std::size_t finger, std::span<const Tensor<T>> joint_features);
  Tensor<T> ensemble(const Tensor<T>& palm_feature, std::span<const Tensor<T>> finger_features);

  std::vector<NamedParameter<T>>& parameters();
  const std::vector<NamedParameter<T>>& parameters() const;
  /// Throws ConfigError for unknown names.
  Tensor<T>& parameter(std::string_view name);
  std::vector<NamedBatchNorm<T>>& batch_norms();
  const std::vector<NamedBatchNorm<T>>& batch_norms() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Finger GRU of the six-branch variant.
  GruParams<T>& finger_gru(std::size_t finger);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Trainable scalar count of a configuration without allocating it.
std::size_t count_parameters(const ModelConfig& config, const JointTopology& topology, Variant variant);

/// Width for which the two-branch baseline's parameter count is closest to
/// the six-branch network's.
std::size_t tune_two_branch_width(const ModelConfig& config, const JointTopology& topology);

extern template class HcrnnModel<float>;
extern template class HcrnnModel<double>;

}  // namespace hcrnn
