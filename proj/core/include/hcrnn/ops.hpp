#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hcrnn/tensor.hpp"

namespace hcrnn {

enum class Mode { train, infer };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Running moments owned by one batch-norm layer.
template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

// Linear algebra. Every op checks extents and throws DimensionError on
// mismatch; the only broadcast is a bias over the batch/spatial axes.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// y = x W^T + b for x of shape [d_in] or [batch x d_in]; bias optional.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {});

/// Cross-correlation of [C_in x H x W] or [N x C_in x H x W] input with a
/// [C_out x C_in x kh x kw] kernel.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, std::size_t stride = 1,
                 std::size_t padding = 0);

/// Non-overlapping 2x2 mean pooling; H and W must be even.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input);

/// [C x H x W] -> [C]; [N x C x H x W] -> [N x C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

/// Normalizes [N x C x H x W] per channel. Train mode uses batch moments
/// (requires N >= 2) and updates `stats`; infer mode reads `stats`.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                     Mode mode);

// Elementwise.

/// While one is alive on a thread, every relu there folds the sign pattern
/// of its input into hash(). Two evaluations with equal hashes took the same
/// branch of every relu, so a difference quotient between them is free of
/// kinks. Only the innermost live probe is fed.
class ReluPatternProbe {
 public:
  ReluPatternProbe();
  ~ReluPatternProbe();
  ReluPatternProbe(const ReluPatternProbe&) = delete;
  ReluPatternProbe& operator=(const ReluPatternProbe&) = delete;

  std::uint64_t hash() const { return hash_; }
  void reset() { hash_ = kSeed; }

  template <typename T>
  void fold(std::span<const T> values);

 private:
  static constexpr std::uint64_t kSeed = 1469598103934665603ull;
  std::uint64_t hash_ = kSeed;
  ReluPatternProbe* previous_;
};

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// 1 - x
template <typename T>
Tensor<T> one_minus(const Tensor<T>& x);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// 0.5 x^2 below the 0.01 knee, 0.01 (|x| - 0.005) above it.
template <typename T>
Tensor<T> smooth_l1(const Tensor<T>& x);

// Structural.

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Reductions.

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

}  // namespace hcrnn
