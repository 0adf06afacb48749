#pragma once

#include <span>

#include "hcrnn/model.hpp"
#include "hcrnn/tensor.hpp"
#include "hcrnn/topology.hpp"

namespace hcrnn {

template <typename T>
struct LossTerms {
  Tensor<T> total;   // global + lambda * local
  Tensor<T> global;
  Tensor<T> local;
};

/// Sum of smooth-l1 over every component of pred - target.
template <typename T>
Tensor<T> smooth_l1_distance(const Tensor<T>& pred, const Tensor<T>& target);

/// Global and local regression losses. Each term is summed over joint
/// components and averaged over the batch (leading axis of rank-2 inputs).
template <typename T>
LossTerms<T> pose_loss(const Tensor<T>& global_pred, const Tensor<T>& global_target,
                       std::span<const Tensor<T>> local_preds, std::span<const Tensor<T>> local_targets, T lambda);

/// Loss of a model output against [batch x 3T] normalized targets; local
/// targets are sliced from the global ones following the topology.
template <typename T>
LossTerms<T> total_loss(const PoseOutput<T>& pred, const Tensor<T>& targets, const JointTopology& topology, T lambda);

}  // namespace hcrnn
