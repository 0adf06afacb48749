#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "hcrnn/ops.hpp"
#include "hcrnn/tensor.hpp"

namespace {

using hcrnn::Shape;
using T64 = hcrnn::Tensor<double>;
using hcrnn::testing::max_entry_error;

T64 random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(hcrnn::shape_numel(shape));
  for (double& x : v) x = dist(rng);
  T64 t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

// Weighted sum so gradients are not uniform.
T64 weighted_sum(const T64& y, const T64& w) { return hcrnn::sum(hcrnn::mul(y, w)); }

T64 weights_like(const T64& y, std::mt19937_64& rng) {
  T64 w = random_tensor(y.shape(), rng);
  w.set_requires_grad(false);
  return w;
}

// Direct cross-correlation, [C x H x W] input.
std::vector<double> conv_oracle(const T64& in, const T64& k, const T64& b, std::size_t stride, std::size_t pad) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(co * oh * ow, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = b.defined() ? b[o] : 0.0;
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t dy = 0; dy < kh; ++dy)
            for (std::size_t dx = 0; dx < kw; ++dx) {
              const long iy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + dx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
              acc += in[(c * h + iy) * w + ix] * k[((o * ci + c) * kh + dy) * kw + dx];
            }
        out[(o * oh + y) * ow + x] = acc;
      }
  return out;
}

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(T64({2, 3}, std::vector<double>(5)), hcrnn::DimensionError);
  EXPECT_THROW(T64({0, 3}, {}), hcrnn::DimensionError);
  EXPECT_EQ(T64::zeros({2, 3, 4}).numel(), 24u);
  EXPECT_EQ(T64::scalar(3).item(), 3);
}

TEST(Tensor, GradHasDataShape) {
  T64 x = T64::full({2, 2}, 1.5);
  x.set_requires_grad(true);
  {
    hcrnn::Tape<double> tape;
    hcrnn::backward(hcrnn::sum(x));
  }
  EXPECT_EQ(x.grad().size(), x.numel());
}

TEST(Matmul, IdentityAndProjection) {
  T64 eye({2, 2}, {1, 0, 0, 1});
  T64 m({2, 2}, {1, 2, 3, 4});
  auto y = hcrnn::matmul(eye, m);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 2, 3, 4}));
  auto p = hcrnn::matmul(T64({2, 2}, {1, 0, 0, 0}), T64({2, 1}, {5, 7}));
  EXPECT_EQ(p.shape(), (Shape{2, 1}));
  EXPECT_EQ(p[0], 5);
  EXPECT_EQ(p[1], 0);
}

TEST(Matmul, InnerExtentMismatch) {
  EXPECT_THROW(hcrnn::matmul(T64::zeros({2, 3}), T64::zeros({2, 3})), hcrnn::DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  T64 a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const double err = max_entry_error({&a, &b}, [&] { return hcrnn::sum(hcrnn::matmul(a, b)); }, 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(Conv2d, IdentityKernel) {
  T64 in({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = hcrnn::conv2d(in, T64({1, 1, 1, 1}, {1}), T64({1}, {0}));
  EXPECT_EQ(y.shape(), in.shape());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], in[i]);
}

TEST(Conv2d, OnesWithPaddingCountsNeighbours) {
  auto y = hcrnn::conv2d(T64::full({1, 3, 3}, 1), T64::full({1, 1, 3, 3}, 1), T64({1}, {0}), 1, 1);
  EXPECT_EQ(y[4], 9);
  EXPECT_EQ(y[0], 4);
  EXPECT_EQ(y[8], 4);
  EXPECT_EQ(y[1], 6);
}

TEST(Conv2d, MatchesDirectSummation) {
  std::mt19937_64 rng(2);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      T64 in = random_tensor({3, 7, 6}, rng), k = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
      if ((7 + 2 * pad - 3) % stride != 0 || (6 + 2 * pad - 3) % stride != 0) continue;
      auto y = hcrnn::conv2d(in, k, b, stride, pad);
      auto ref = conv_oracle(in, k, b, stride, pad);
      ASSERT_EQ(y.numel(), ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12) << stride << "/" << pad;
    }
  }
}

TEST(Conv2d, BatchedEqualsPerSample) {
  std::mt19937_64 rng(3);
  T64 in = random_tensor({2, 2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  auto y = hcrnn::conv2d(in, k, b, 1, 1);
  for (std::size_t n = 0; n < 2; ++n) {
    auto one = hcrnn::conv2d(hcrnn::reshape(hcrnn::slice(in, 0, n, n + 1), {2, 5, 5}), k, b, 1, 1);
    for (std::size_t i = 0; i < one.numel(); ++i) EXPECT_EQ(y[n * one.numel() + i], one[i]);
  }
}

TEST(Conv2d, NonIntegralExtent) {
  EXPECT_THROW(hcrnn::conv2d(T64::zeros({1, 4, 4}), T64::zeros({1, 1, 3, 3}), T64::zeros({1}), 2, 0),
               hcrnn::DimensionError);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  T64 in = random_tensor({2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  T64 w = weights_like(hcrnn::conv2d(in, k, b, 1, 1), rng);
  const double err =
      max_entry_error({&in, &k, &b}, [&] { return weighted_sum(hcrnn::conv2d(in, k, b, 1, 1), w); }, 1e-5);
  EXPECT_LT(err, 1e-5);
}

TEST(Conv2d, StridedGradient) {
  std::mt19937_64 rng(5);
  T64 in = random_tensor({2, 2, 7, 7}, rng), k = random_tensor({2, 2, 3, 3}, rng), b = random_tensor({2}, rng);
  T64 w = weights_like(hcrnn::conv2d(in, k, b, 2, 1), rng);
  EXPECT_LT(max_entry_error({&in, &k, &b}, [&] { return weighted_sum(hcrnn::conv2d(in, k, b, 2, 1), w); }, 1e-5),
            1e-5);
}

TEST(Conv2d, LinearInInputWithoutBias) {
  std::mt19937_64 rng(6);
  T64 in = random_tensor({2, 6, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng);
  T64 zero_b = T64::zeros({3});
  auto y = hcrnn::conv2d(in, k, zero_b, 1, 1);
  auto y2 = hcrnn::conv2d(hcrnn::scale(in, 2.5), k, zero_b, 1, 1);
  for (std::size_t i = 0; i < y.numel(); ++i) {
    EXPECT_LE(std::abs(y2[i] - 2.5 * y[i]), 1e-6 * std::max(1.0, std::abs(2.5 * y[i])));
  }
}

TEST(AvgPool, Examples) {
  EXPECT_EQ(hcrnn::avg_pool2d(T64::full({1, 2, 2}, 1)).item(), 1);
  EXPECT_EQ(hcrnn::avg_pool2d(T64({1, 2, 2}, {1, 2, 3, 4})).item(), 2.5);
  EXPECT_THROW(hcrnn::avg_pool2d(T64::zeros({1, 3, 4})), hcrnn::DimensionError);
}

TEST(AvgPool, ChainedShapesKeepChannels) {
  hcrnn::Tensor<float> x = hcrnn::Tensor<float>::full({64, 96, 96}, 0.5f);
  std::vector<std::size_t> sizes;
  for (int i = 0; i < 3; ++i) {
    x = hcrnn::avg_pool2d(x);
    EXPECT_EQ(x.dim(0), 64u);
    sizes.push_back(x.dim(1));
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{48, 24, 12}));
}

TEST(AvgPool, PreservesChannelMean) {
  std::mt19937_64 rng(7);
  T64 x = random_tensor({3, 8, 6}, rng);
  auto m_in = hcrnn::global_avg_pool(x);
  auto m_out = hcrnn::global_avg_pool(hcrnn::avg_pool2d(x));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(m_in[c], m_out[c], 1e-6);
}

TEST(AvgPool, Gradient) {
  std::mt19937_64 rng(8);
  T64 x = random_tensor({2, 4, 6}, rng);
  T64 w = weights_like(hcrnn::avg_pool2d(x), rng);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::avg_pool2d(x), w); }, 1e-5), 1e-6);
  // g/4 spread per cell
  x.zero_grad();
  {
    hcrnn::Tape<double> tape;
    hcrnn::backward(hcrnn::sum(hcrnn::avg_pool2d(x)));
  }
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(GlobalAvgPool, ConstantAndShape) {
  auto y = hcrnn::global_avg_pool(T64::full({4, 3, 5}, 3));
  EXPECT_EQ(y.shape(), (Shape{4}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 3);
  EXPECT_EQ(hcrnn::global_avg_pool(hcrnn::Tensor<float>::zeros({256, 12, 12})).shape(), (Shape{256}));
  EXPECT_EQ(hcrnn::global_avg_pool(T64::zeros({2, 5, 3, 3})).shape(), (Shape{2, 5}));
}

TEST(GlobalAvgPool, Gradient) {
  std::mt19937_64 rng(9);
  T64 x = random_tensor({3, 4, 5}, rng);
  T64 w = weights_like(hcrnn::global_avg_pool(x), rng);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::global_avg_pool(x), w); }, 1e-5), 1e-6);
}

TEST(Linear, ZeroWeightsGiveBias) {
  T64 b({3}, {1, -2, 0.5});
  auto y = hcrnn::linear(T64::full({4}, 7), T64::zeros({3, 4}), b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], b[i]);
  auto yb = hcrnn::linear(T64::full({2, 4}, 7), T64::zeros({3, 4}), b);
  EXPECT_EQ(yb.shape(), (Shape{2, 3}));
  EXPECT_EQ(yb[4], -2);
}

TEST(Linear, FullWidthsAccepted) {
  using F = hcrnn::Tensor<float>;
  EXPECT_EQ(hcrnn::linear(F::zeros({256}), F::zeros({256, 256}), F::zeros({256})).shape(), (Shape{256}));
  EXPECT_EQ(hcrnn::linear(F::zeros({2, 1536}), F::zeros({1024, 1536}), F::zeros({1024})).shape(),
            (Shape{2, 1024}));
  EXPECT_THROW(hcrnn::linear(F::zeros({255}), F::zeros({256, 256}), F::zeros({256})), hcrnn::DimensionError);
}

TEST(Linear, Gradient) {
  std::mt19937_64 rng(10);
  T64 x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
  T64 o = weights_like(hcrnn::linear(x, w, b), rng);
  EXPECT_LT(max_entry_error({&x, &w, &b}, [&] { return weighted_sum(hcrnn::linear(x, w, b), o); }, 1e-5), 1e-6);
}

TEST(Activations, ScalarValues) {
  EXPECT_EQ(hcrnn::relu(T64::scalar(-1)).item(), 0);
  EXPECT_EQ(hcrnn::relu(T64::scalar(2)).item(), 2);
  EXPECT_EQ(hcrnn::sigmoid(T64::scalar(0)).item(), 0.5);
  EXPECT_EQ(hcrnn::tanh(T64::scalar(0)).item(), 0);
  EXPECT_EQ(hcrnn::one_minus(T64::scalar(0.25)).item(), 0.75);
}

TEST(Activations, Gradients) {
  std::mt19937_64 rng(11);
  // keep relu inputs away from the kink
  T64 x({6}, {-0.9, -0.4, -0.1, 0.2, 0.5, 1.3});
  x.set_requires_grad(true);
  T64 y = random_tensor({6}, rng);
  T64 w = weights_like(x, rng);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::relu(x), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::sigmoid(x), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::tanh(x), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x, &y}, [&] { return weighted_sum(hcrnn::mul(x, y), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x, &y}, [&] { return weighted_sum(hcrnn::add(x, y), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x, &y}, [&] { return weighted_sum(hcrnn::sub(x, y), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x}, [&] { return weighted_sum(hcrnn::one_minus(x), w); }, 1e-5), 1e-4);
  EXPECT_LT(max_entry_error({&x}, [&] { return hcrnn::mean(hcrnn::scale(x, 3.0)); }, 1e-5), 1e-4);
}

TEST(Elementwise, ShapeMismatchIsAnError) {
  EXPECT_THROW(hcrnn::add(T64::zeros({3}), T64::zeros({4})), hcrnn::DimensionError);
  EXPECT_THROW(hcrnn::mul(T64::zeros({2, 2}), T64::zeros({4})), hcrnn::DimensionError);
}

TEST(Concat, Widths) {
  using F = hcrnn::Tensor<float>;
  std::vector<F> parts{F::zeros({256})};
  for (int i = 0; i < 5; ++i) parts.push_back(F::zeros({256}));
  EXPECT_EQ(hcrnn::concat(parts, 0).shape(), (Shape{1536}));
  EXPECT_THROW(hcrnn::concat(std::vector<F>{F::zeros({2, 3}), F::zeros({3, 3})}, 1), hcrnn::DimensionError);
  EXPECT_EQ(hcrnn::concat(std::vector<F>{F::zeros({2, 3}), F::zeros({2, 5})}, 1).shape(), (Shape{2, 8}));
}

TEST(Concat, SliceGradients) {
  std::mt19937_64 rng(12);
  T64 a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
  T64 w = weights_like(T64::zeros({2, 2}), rng);
  auto f = [&] { return weighted_sum(hcrnn::slice(hcrnn::concat(std::vector<T64>{a, b}, 1), 1, 2, 4), w); };
  EXPECT_LT(max_entry_error({&a, &b}, f, 1e-5), 1e-6);
  auto g = [&] { return hcrnn::sum(hcrnn::mul(hcrnn::reshape(a, {3, 2}), hcrnn::reshape(a, {3, 2}))); };
  EXPECT_LT(max_entry_error({&a}, g, 1e-5), 1e-6);
}

TEST(BatchNorm, NormalizedInputPassesThrough) {
  // Per channel exactly zero mean, unit (biased) variance.
  T64 x({2, 1, 2, 2}, {1, -1, 1, -1, -1, 1, -1, 1});
  hcrnn::BatchNormStats<double> stats(1);
  auto y = hcrnn::batch_norm(x, T64::full({1}, 1), T64::zeros({1}), stats, hcrnn::Mode::train);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_LT(std::abs(y[i] - x[i]), 1e-3);
}

TEST(BatchNorm, ConstantInputGivesBeta) {
  hcrnn::BatchNormStats<double> stats(2);
  auto y = hcrnn::batch_norm(T64::full({3, 2, 2, 2}, 4.0), T64::full({2}, 1), T64::full({2}, 5), stats,
                             hcrnn::Mode::train);
  for (double v : y.data()) EXPECT_NEAR(v, 5.0, 1e-9);
}

TEST(BatchNorm, RunningMomentsAndInfer) {
  std::mt19937_64 rng(13);
  T64 x = random_tensor({4, 2, 3, 3}, rng, 0, 2);
  hcrnn::BatchNormStats<double> stats(2);
  hcrnn::batch_norm(x, T64::full({2}, 1), T64::zeros({2}), stats, hcrnn::Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    const std::size_t count = 4 * 9;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) m += x[(n * 2 + c) * 9 + i];
    m /= count;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) v += std::pow(x[(n * 2 + c) * 9 + i] - m, 2);
    EXPECT_NEAR(stats.running_mean[c], 0.1 * m, 1e-12);
    EXPECT_NEAR(stats.running_var[c], 0.9 + 0.1 * v / (count - 1), 1e-12);
  }
  // A single sample is fine in infer mode.
  T64 one = hcrnn::slice(x, 0, 0, 1);
  auto y = hcrnn::batch_norm(one, T64::full({2}, 2), T64::full({2}, 1), stats, hcrnn::Mode::infer);
  const double expect =
      2 * (one[0] - stats.running_mean[0]) / std::sqrt(stats.running_var[0] + hcrnn::kBatchNormEps) + 1;
  EXPECT_NEAR(y[0], expect, 1e-12);
}

TEST(BatchNorm, TrainModeRejectsSingleSample) {
  hcrnn::BatchNormStats<double> stats(1);
  EXPECT_THROW(hcrnn::batch_norm(T64::zeros({1, 1, 2, 2}), T64::full({1}, 1), T64::zeros({1}), stats,
                                 hcrnn::Mode::train),
               hcrnn::ConfigError);
}

TEST(BatchNorm, GradientBatchFour) {
  std::mt19937_64 rng(14);
  T64 x = random_tensor({4, 3, 2, 3}, rng), g = random_tensor({3}, rng, 0.5, 1.5), b = random_tensor({3}, rng);
  T64 w = weights_like(x, rng);
  hcrnn::BatchNormStats<double> stats(3);
  auto f = [&] { return weighted_sum(hcrnn::batch_norm(x, g, b, stats, hcrnn::Mode::train), w); };
  EXPECT_LT(max_entry_error({&x, &g, &b}, f, 1e-5), 1e-4);
}

TEST(SmoothL1, ValuesAndGradientAcrossKnee) {
  T64 x({6}, {0.0, 0.01, 0.1, -0.1, 0.004, -0.03});
  auto y = hcrnn::smooth_l1(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 5e-5, 1e-15);
  EXPECT_NEAR(y[2], 9.5e-4, 1e-15);
  EXPECT_NEAR(y[3], 9.5e-4, 1e-15);
  EXPECT_NEAR(y[4], 0.5 * 0.004 * 0.004, 1e-15);
  std::vector<double> knee{0.0097, 0.0099, 0.0101, 0.0103, -0.0097, -0.0103, 0.2, -0.05, 0.001};
  T64 k({knee.size()}, knee);
  k.set_requires_grad(true);
  EXPECT_LT(max_entry_error({&k}, [&] { return hcrnn::sum(hcrnn::smooth_l1(k)); }, 1e-6), 1e-4);
}

TEST(Activations, ReluPatternProbe) {
  T64 a({4}, {-1, 0.5, 2, -3}), b({4}, {-2, 0.1, 7, -0.5}), c({4}, {-2, -0.1, 7, -0.5});
  auto hash_of = [](const T64& x) {
    hcrnn::ReluPatternProbe probe;
    hcrnn::relu(x);
    return probe.hash();
  };
  EXPECT_EQ(hash_of(a), hash_of(b));
  EXPECT_NE(hash_of(a), hash_of(c));
  {
    hcrnn::ReluPatternProbe outer;
    const auto empty = outer.hash();
    EXPECT_NE(hash_of(a), empty);
    EXPECT_EQ(outer.hash(), empty);  // the inner probe took the fold
    hcrnn::relu(a);
    EXPECT_NE(outer.hash(), empty);
  }
  hcrnn::relu(a);  // no probe alive
}

TEST(Activations, KinkFreeDifferenceShrinksAcrossKink) {
  // relu(x) at x = 3e-6: a step of 1e-5 straddles the kink, 1e-6 does not
  T64 x({1}, {3e-6});
  const hcrnn::testing::ScalarFn f = [&] { return hcrnn::sum(hcrnn::relu(x)); };
  const double chord = hcrnn::testing::entry_fd(x, 0, f, 1e-5);
  EXPECT_NEAR(chord, 0.65, 1e-9);
  const auto fd = hcrnn::testing::kink_free_fd(x, {1.0}, f, 1e-5, 1e-8);
  EXPECT_TRUE(fd.kink_free);
  EXPECT_DOUBLE_EQ(fd.h, 1e-6);
  EXPECT_NEAR(fd.value, 1.0, 1e-9);
  EXPECT_EQ(x.data()[0], 3e-6);
  T64 at_kink({1}, {0.0});
  const hcrnn::testing::ScalarFn g = [&] { return hcrnn::sum(hcrnn::relu(at_kink)); };
  EXPECT_FALSE(hcrnn::testing::kink_free_fd(at_kink, {1.0}, g, 1e-5, 1e-8).kink_free);
}

TEST(Backward, SumAndSquare) {
  std::mt19937_64 rng(15);
  T64 x = random_tensor({5}, rng);
  {
    hcrnn::Tape<double> tape;
    hcrnn::backward(hcrnn::sum(x));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  x.zero_grad();
  {
    hcrnn::Tape<double> tape;
    hcrnn::backward(hcrnn::sum(hcrnn::mul(x, x)));
  }
  auto g = x.grad();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(g[i], 2 * x[i]);
}

TEST(Backward, RejectsNonScalarAndDetachedSeeds) {
  T64 x = T64::full({3}, 1);
  x.set_requires_grad(true);
  {
    hcrnn::Tape<double> tape;
    auto y = hcrnn::scale(x, 2.0);
    EXPECT_THROW(hcrnn::backward(y), hcrnn::UsageError);
  }
  auto detached = hcrnn::sum(x);  // no tape active
  EXPECT_THROW(hcrnn::backward(detached), hcrnn::UsageError);
}

TEST(Backward, TapeIsConsumed) {
  T64 x = T64::full({3}, 1);
  x.set_requires_grad(true);
  hcrnn::Tape<double> tape;
  auto y = hcrnn::sum(x);
  hcrnn::backward(y);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(hcrnn::backward(y), hcrnn::UsageError);
}

TEST(Backward, GradientsAreAdditive) {
  std::mt19937_64 rng(16);
  T64 x = random_tensor({4}, rng);
  auto a = [&] { return hcrnn::sum(hcrnn::tanh(x)); };
  auto b = [&] { return hcrnn::sum(hcrnn::mul(x, x)); };
  auto ga = hcrnn::testing::analytic_grads({&x}, a)[0];
  auto gb = hcrnn::testing::analytic_grads({&x}, b)[0];
  auto gab = hcrnn::testing::analytic_grads({&x}, [&] { return hcrnn::add(a(), b()); })[0];
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(gab[i], ga[i] + gb[i], 1e-14);
}

TEST(Backward, SharedInputAccumulates) {
  T64 x({2}, {3, -2});
  x.set_requires_grad(true);
  auto g = hcrnn::testing::analytic_grads({&x}, [&] { return hcrnn::sum(hcrnn::add(x, hcrnn::scale(x, 4.0))); })[0];
  EXPECT_EQ(g, (std::vector<double>{5, 5}));
}

TEST(Numeric, NonFiniteOutputNamesOpAndInput) {
  T64 x = T64::full({3}, 1);
  x.set_name("probe");
  x.mutable_data()[1] = std::nan("");
  try {
    hcrnn::relu(x);
    FAIL() << "expected NumericError";
  } catch (const hcrnn::NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("relu"), std::string::npos) << msg;
    EXPECT_NE(msg.find("probe"), std::string::npos) << msg;
  }
  EXPECT_THROW(hcrnn::scale(T64::full({2}, 1e300), 1e300), hcrnn::NumericError);
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  std::mt19937_64 rng(17);
  auto in = random_tensor({2, 3, 8, 8}, rng), k = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
  auto y1 = hcrnn::conv2d(in, k, b, 1, 1);
  auto y2 = hcrnn::conv2d(in, k, b, 1, 1);
  EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

}  // namespace
