#include <benchmark/benchmark.h>

#include <vector>

#include "hcrnn/loss.hpp"
#include "hcrnn/model.hpp"

namespace {

using hcrnn::HcrnnModel;
using hcrnn::ModelConfig;
using hcrnn::Tensor;

Tensor<float> patches(std::size_t batch) {
  std::vector<float> v(batch * 96 * 96);
  hcrnn::Rng rng(1);
  hcrnn::fill_uniform(std::span<float>(v), 1.0, rng);
  return Tensor<float>({batch, 1, 96, 96}, v);
}

// Batch-1 inference, the throughput setting of the bench command.
void BM_Forward(benchmark::State& state, ModelConfig cfg, hcrnn::Variant variant) {
  HcrnnModel<float> model(cfg, hcrnn::JointTopology::preset("msra"), variant, 2);
  const auto x = patches(1);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, hcrnn::Mode::infer).global);
}
BENCHMARK_CAPTURE(BM_Forward, tiny, ModelConfig::tiny(), hcrnn::Variant::full);
BENCHMARK_CAPTURE(BM_Forward, reference, ModelConfig::reference(), hcrnn::Variant::full)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Forward, reference_two_branch, ModelConfig::reference(), hcrnn::Variant::two_branch)
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto topo = hcrnn::JointTopology::preset("msra");
  HcrnnModel<float> model(ModelConfig::tiny(), topo, hcrnn::Variant::full, 3);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = patches(batch);
  const auto y = Tensor<float>::zeros({batch, 3 * topo.total_joints()});
  for (auto _ : state) {
    model.zero_grad();
    hcrnn::Tape<float> tape;
    const auto out = model.forward(x, hcrnn::Mode::train);
    hcrnn::backward(hcrnn::total_loss(out, y, topo, 1.0f).total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
