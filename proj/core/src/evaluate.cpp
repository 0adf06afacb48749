#include <chrono>

#include "hcrnn/error.hpp"
#include "hcrnn/evaluate.hpp"
#include "hcrnn/train.hpp"

namespace hcrnn {

template <typename T>
std::vector<std::vector<Vec3>> predict_mm(HcrnnModel<T>& model, std::span<const HandSample> samples,
                                          std::size_t batch) {
  if (batch == 0) throw UsageError("predict_mm: batch must be positive");
  std::vector<std::vector<Vec3>> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t n = std::min(batch, samples.size() - start);
    const auto chunk = samples.subspan(start, n);
    const Tensor<T> pred = model.forward(batch_patches<T>(chunk), Mode::infer).global;
    const std::size_t width = pred.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> norm(width);
      for (std::size_t k = 0; k < width; ++k) norm[k] = static_cast<double>(pred[i * width + k]);
      out.push_back(denormalize(norm, chunk[i].crop));
    }
  }
  return out;
}

template <typename T>
Throughput measure_throughput(HcrnnModel<T>& model, std::span<const HandSample> samples, std::size_t warmup,
                              std::size_t iterations) {
  if (samples.empty()) throw UsageError("throughput: no samples");
  if (iterations == 0) throw UsageError("throughput: iterations must be at least 1");
  using clock = std::chrono::steady_clock;
  std::vector<double> seconds;
  seconds.reserve(iterations);
  for (std::size_t i = 0; i < warmup + iterations; ++i) {
    const Tensor<T> x = batch_patches<T>(samples.subspan(i % samples.size(), 1));
    const auto t0 = clock::now();
    const PoseOutput<T> out = model.forward(x, Mode::infer);
    const auto t1 = clock::now();
    if (i >= warmup) seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return summarize_latencies(seconds);
}

template <typename T>
EvalReport evaluate(HcrnnModel<T>& model, std::span<const HandSample> samples, const EvalOptions& options) {
  if (samples.empty()) throw UsageError("evaluate: empty sample stream");
  const auto predicted = predict_mm(model, samples);
  std::vector<std::vector<Vec3>> truth;
  truth.reserve(samples.size());
  for (const HandSample& s : samples) {
    std::vector<Vec3> joints(s.joints_mm.size() / 3);
    for (std::size_t j = 0; j < joints.size(); ++j) {
      joints[j] = {s.joints_mm[3 * j], s.joints_mm[3 * j + 1], s.joints_mm[3 * j + 2]};
    }
    truth.push_back(std::move(joints));
  }
  EvalReport report = compute_metrics(predicted, truth, options.thresholds);
  if (options.timed_frames > 0) {
    report.throughput = measure_throughput(model, samples, options.warmup, options.timed_frames);
  }
  return report;
}

#define HCRNN_INSTANTIATE_EVAL(T)                                                                              \
  template std::vector<std::vector<Vec3>> predict_mm<T>(HcrnnModel<T>&, std::span<const HandSample>,          \
                                                        std::size_t);                                          \
  template Throughput measure_throughput<T>(HcrnnModel<T>&, std::span<const HandSample>, std::size_t,          \
                                            std::size_t);                                                      \
  template EvalReport evaluate<T>(HcrnnModel<T>&, std::span<const HandSample>, const EvalOptions&);

HCRNN_INSTANTIATE_EVAL(float)
HCRNN_INSTANTIATE_EVAL(double)

#undef HCRNN_INSTANTIATE_EVAL

}  // namespace hcrnn
