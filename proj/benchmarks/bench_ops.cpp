#include <benchmark/benchmark.h>

#include <vector>

#include "hcrnn/gru.hpp"
#include "hcrnn/ops.hpp"

namespace {

using hcrnn::Tensor;

Tensor<float> random_tensor(hcrnn::Shape shape, std::uint64_t seed) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<float> v(n);
  hcrnn::Rng rng(seed);
  hcrnn::fill_uniform(std::span<float>(v), 1.0, rng);
  return Tensor<float>(std::move(shape), v);
}

// args: channels, spatial size
void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  const auto x = random_tensor({1, c, s, s}, 1);
  const auto k = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(hcrnn::conv2d(x, k, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * c * c * 9 * s * s));
}
BENCHMARK(BM_Conv3x3)->Args({8, 96})->Args({64, 96})->Args({128, 24})->Args({256, 12});

void BM_ConvBackward(benchmark::State& state) {
  auto x = random_tensor({2, 16, 48, 48}, 4);
  auto k = random_tensor({16, 16, 3, 3}, 5);
  auto b = random_tensor({16}, 6);
  k.set_requires_grad(true);
  for (auto _ : state) {
    hcrnn::Tape<float> tape;
    hcrnn::backward(hcrnn::sum(hcrnn::conv2d(x, k, b, 1, 1)));
  }
}
BENCHMARK(BM_ConvBackward);

void BM_GruUnroll(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  hcrnn::Rng rng(7);
  const auto p = hcrnn::GruParams<float>::random(h, h, 3, rng);
  std::vector<Tensor<float>> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_tensor({h}, 8 + static_cast<std::uint64_t>(i)));
  for (auto _ : state) benchmark::DoNotOptimize(hcrnn::gru_unroll<float>(p, xs));
}
BENCHMARK(BM_GruUnroll)->Arg(16)->Arg(256);

}  // namespace
