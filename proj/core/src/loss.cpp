#include "hcrnn/loss.hpp"

#include "hcrnn/ops.hpp"

namespace hcrnn {

template <typename T>
Tensor<T> smooth_l1_distance(const Tensor<T>& pred, const Tensor<T>& target) {
  return sum(smooth_l1(sub(pred, target)));
}

template <typename T>
LossTerms<T> pose_loss(const Tensor<T>& global_pred, const Tensor<T>& global_target,
                       std::span<const Tensor<T>> local_preds, std::span<const Tensor<T>> local_targets, T lambda) {
  if (local_preds.size() != local_targets.size()) {
    throw DimensionError("pose_loss: " + std::to_string(local_preds.size()) + " local predictions vs " +
                         std::to_string(local_targets.size()) + " targets");
  }
  const T inv_batch = T(1) / static_cast<T>(global_pred.rank() == 2 ? global_pred.dim(0) : 1);
  Tensor<T> global = scale(smooth_l1_distance(global_pred, global_target), inv_batch);
  Tensor<T> local;
  for (std::size_t i = 0; i < local_preds.size(); ++i) {
    Tensor<T> term = smooth_l1_distance(local_preds[i], local_targets[i]);
    local = local.defined() ? add(local, term) : term;
  }
  if (!local.defined()) local = Tensor<T>::scalar(T(0));
  local = scale(local, inv_batch);
  return {add(global, scale(local, lambda)), global, local};
}

template <typename T>
LossTerms<T> total_loss(const PoseOutput<T>& pred, const Tensor<T>& targets, const JointTopology& topology,
                        T lambda) {
  const std::size_t t3 = 3 * topology.total_joints();
  const Tensor<T> gt = targets.rank() == 1 ? reshape(targets, {1, targets.dim(0)}) : targets;
  if (gt.rank() != 2 || gt.dim(1) != t3) {
    throw DimensionError("total_loss: targets " + shape_str(targets.shape()) + " for " +
                         std::to_string(topology.total_joints()) + " joints");
  }
  const Tensor<T> global = pred.global.rank() == 1 ? reshape(pred.global, {1, pred.global.dim(0)}) : pred.global;
  auto batched = [](const Tensor<T>& x) { return x.rank() == 1 ? reshape(x, {1, x.dim(0)}) : x; };
  std::vector<Tensor<T>> preds{batched(pred.palm)};
  std::vector<Tensor<T>> gts{slice(gt, 1, 0, 3 * topology.palm_count())};
  for (std::size_t k = 0; k < kFingerCount; ++k) {
    const std::size_t off = topology.finger_offset(k);
    preds.push_back(batched(pred.fingers[k]));
    gts.push_back(slice(gt, 1, 3 * off, 3 * (off + topology.fingers[k].length())));
  }
  return pose_loss<T>(global, gt, preds, gts, lambda);
}

template Tensor<float> smooth_l1_distance(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> smooth_l1_distance(const Tensor<double>&, const Tensor<double>&);
template LossTerms<float> pose_loss(const Tensor<float>&, const Tensor<float>&, std::span<const Tensor<float>>,
                                    std::span<const Tensor<float>>, float);
template LossTerms<double> pose_loss(const Tensor<double>&, const Tensor<double>&, std::span<const Tensor<double>>,
                                     std::span<const Tensor<double>>, double);
template LossTerms<float> total_loss(const PoseOutput<float>&, const Tensor<float>&, const JointTopology&, float);
template LossTerms<double> total_loss(const PoseOutput<double>&, const Tensor<double>&, const JointTopology&, double);

}  // namespace hcrnn
