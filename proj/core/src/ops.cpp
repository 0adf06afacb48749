#include "hcrnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

namespace hcrnn {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatR<T>>;
template <typename T>
using ConstMap = Eigen::Map<const MatR<T>>;

template <typename T>
using NodePtr = detail::NodePtr<T>;

template <typename T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
Tensor<T> make_output(Shape shape, detail::Buffer<T> data, const char* op,
                      std::initializer_list<const Tensor<T>*> inputs) {
  for (T v : data) {
    if (!std::isfinite(v)) {
      std::string msg = std::string("non-finite value produced by ") + op;
      std::string names;
      for (const Tensor<T>* t : inputs) {
        if (t == nullptr || !t->defined()) continue;
        if (!names.empty()) names += ", ";
        names += t->name().empty() ? shape_str(t->shape()) : "'" + t->name() + "'";
      }
      if (!names.empty()) msg += " (inputs: " + names + ")";
      throw NumericError(msg);
    }
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->name = op;
  return Tensor<T>(std::move(node));
}

template <typename T>
void record(const Tensor<T>& out, typename Tape<T>::BackwardFn fn) {
  Tape<T>::active()->record(out.node(), std::move(fn));
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// im2col helpers. col has (C*kh*kw) rows and (Ho*Wo) columns.

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t col_rows() const { return channels * kh * kw; }
  std::size_t col_cols() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) read in-bounds input for kernel column j.
inline void valid_columns(const ConvGeometry& g, std::size_t j, std::size_t& lo, std::size_t& hi) {
  // x = ox * stride + j - pad must lie in [0, width).
  lo = j >= g.pad ? 0 : (g.pad - j + g.stride - 1) / g.stride;
  const std::size_t limit = g.width + g.pad - j;  // x < width  <=>  ox * stride < limit
  hi = g.width + g.pad > j ? std::min(g.out_w, (limit + g.stride - 1) / g.stride) : 0;
  if (hi < lo) hi = lo;
}

template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = in + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        std::size_t lo, hi;
        valid_columns(g, j, lo, hi);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height) || lo >= hi) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * g.width + j - g.pad;  // indexed by ox*stride
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + hi, dst + g.out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in_grad) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = in_grad + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        std::size_t lo, hi;
        valid_columns(g, j, lo, hi);
        if (lo >= hi) continue;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = plane + static_cast<std::size_t>(y) * g.width + j - g.pad;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
        }
      }
    }
  }
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* op, Fwd fwd, Deriv deriv) {
  detail::Buffer<T> out(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  Tensor<T> y = make_output(x.shape(), std::move(out), op, {&x});
  if (tracking({&x})) {
    NodePtr<T> xn = x.node();
    detail::Node<T>* yn = y.node().get();
    record(y, [xn, yn, deriv](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xn->data[i], yn->data[i]);
    });
  }
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2,
          "matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner extents differ: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  detail::Buffer<T> out(m * n);
  Map<T>(out.data(), m, n).noalias() = ConstMap<T>(a.data().data(), m, k) * ConstMap<T>(b.data().data(), k, n);
  Tensor<T> y = make_output(Shape{m, n}, std::move(out), "matmul", {&a, &b});
  if (tracking({&a, &b})) {
    NodePtr<T> an = a.node(), bn = b.node();
    record(y, [an, bn, m, k, n](std::span<const T> g) {
      ConstMap<T> G(g.data(), m, n);
      if (an->requires_grad) {
        Map<T>(an->ensure_grad().data(), m, k).noalias() += G * ConstMap<T>(bn->data.data(), k, n).transpose();
      }
      if (bn->requires_grad) {
        Map<T>(bn->ensure_grad().data(), k, n).noalias() += ConstMap<T>(an->data.data(), m, k).transpose() * G;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(weight.rank() == 2, "linear: weight must be rank 2, got " + shape_str(weight.shape()));
  require(x.rank() == 1 || x.rank() == 2, "linear: input must be rank 1 or 2, got " + shape_str(x.shape()));
  const std::size_t d_out = weight.dim(0), d_in = weight.dim(1);
  const std::size_t batch = x.rank() == 2 ? x.dim(0) : 1;
  require(x.shape().back() == d_in,
          "linear: input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.rank() == 1 && bias.dim(0) == d_out,
            "linear: bias " + shape_str(bias.shape()) + " incompatible with weight " + shape_str(weight.shape()));
  }
  detail::Buffer<T> out(batch * d_out);
  Map<T> Y(out.data(), batch, d_out);
  Y.noalias() = ConstMap<T>(x.data().data(), batch, d_in) * ConstMap<T>(weight.data().data(), d_out, d_in).transpose();
  if (has_bias) Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), d_out);
  Shape shape = x.rank() == 2 ? Shape{batch, d_out} : Shape{d_out};
  Tensor<T> y = make_output(std::move(shape), std::move(out), "linear", {&x, &weight, &bias});
  if (tracking({&x, &weight, &bias})) {
    NodePtr<T> xn = x.node(), wn = weight.node(), bn = has_bias ? bias.node() : nullptr;
    record(y, [xn, wn, bn, batch, d_in, d_out](std::span<const T> g) {
      ConstMap<T> G(g.data(), batch, d_out);
      if (xn->requires_grad) {
        Map<T>(xn->ensure_grad().data(), batch, d_in).noalias() += G * ConstMap<T>(wn->data.data(), d_out, d_in);
      }
      if (wn->requires_grad) {
        Map<T>(wn->ensure_grad().data(), d_out, d_in).noalias() +=
            G.transpose() * ConstMap<T>(xn->data.data(), batch, d_in);
      }
      if (bn && bn->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bn->ensure_grad().data(), d_out) += G.colwise().sum();
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding) {
  require(input.rank() == 3 || input.rank() == 4,
          "conv2d: input must be [C x H x W] or [N x C x H x W], got " + shape_str(input.shape()));
  require(kernel.rank() == 4, "conv2d: kernel must be rank 4, got " + shape_str(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be positive");
  const bool batched = input.rank() == 4;
  const std::size_t n = batched ? input.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  ConvGeometry geo{input.dim(off), input.dim(off + 1), input.dim(off + 2), kernel.dim(2), kernel.dim(3),
                   stride, padding, 0, 0};
  const std::size_t c_out = kernel.dim(0);
  require(kernel.dim(1) == geo.channels,
          "conv2d: kernel " + shape_str(kernel.shape()) + " does not match input " + shape_str(input.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.rank() == 1 && bias.dim(0) == c_out, "conv2d: bias " + shape_str(bias.shape()) +
                                                          " does not match kernel " + shape_str(kernel.shape()));
  }
  const std::size_t span_h = geo.height + 2 * padding, span_w = geo.width + 2 * padding;
  require(span_h >= geo.kh && span_w >= geo.kw && (span_h - geo.kh) % stride == 0 && (span_w - geo.kw) % stride == 0,
          "conv2d: non-integral output extent for input " + shape_str(input.shape()) + ", kernel " +
              shape_str(kernel.shape()) + ", stride " + std::to_string(stride) + ", padding " +
              std::to_string(padding));
  geo.out_h = (span_h - geo.kh) / stride + 1;
  geo.out_w = (span_w - geo.kw) / stride + 1;

  const std::size_t rows = geo.col_rows(), cols = geo.col_cols();
  const std::size_t in_plane = geo.channels * geo.height * geo.width;
  const std::size_t out_plane = c_out * cols;
  detail::Buffer<T> out(n * out_plane);
  detail::Buffer<T> col(geo.pointwise() ? 0 : rows * cols);
  ConstMap<T> K(kernel.data().data(), c_out, rows);
  for (std::size_t s = 0; s < n; ++s) {
    const T* in_s = input.data().data() + s * in_plane;
    if (!geo.pointwise()) im2col(in_s, geo, col.data());
    const T* col_ptr = geo.pointwise() ? in_s : col.data();
    Map<T> Y(out.data() + s * out_plane, c_out, cols);
    Y.noalias() = K * ConstMap<T>(col_ptr, rows, cols);
    if (has_bias) Y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.data().data(), c_out);
  }
  Shape shape = batched ? Shape{n, c_out, geo.out_h, geo.out_w} : Shape{c_out, geo.out_h, geo.out_w};
  Tensor<T> y = make_output(std::move(shape), std::move(out), "conv2d", {&input, &kernel, &bias});
  if (tracking({&input, &kernel, &bias})) {
    NodePtr<T> xn = input.node(), kn = kernel.node(), bn = has_bias ? bias.node() : nullptr;
    record(y, [xn, kn, bn, geo, n, c_out, rows, cols, in_plane, out_plane](std::span<const T> g) {
      detail::Buffer<T> col_buf(geo.pointwise() ? 0 : rows * cols);
      detail::Buffer<T> dcol(geo.pointwise() ? 0 : rows * cols);
      ConstMap<T> K(kn->data.data(), c_out, rows);
      for (std::size_t s = 0; s < n; ++s) {
        ConstMap<T> G(g.data() + s * out_plane, c_out, cols);
        const T* in_s = xn->data.data() + s * in_plane;
        if (kn->requires_grad) {
          if (!geo.pointwise()) im2col(in_s, geo, col_buf.data());
          const T* col_ptr = geo.pointwise() ? in_s : col_buf.data();
          Map<T>(kn->ensure_grad().data(), c_out, rows).noalias() += G * ConstMap<T>(col_ptr, rows, cols).transpose();
        }
        if (bn && bn->requires_grad) {
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(bn->ensure_grad().data(), c_out) += G.rowwise().sum();
        }
        if (xn->requires_grad) {
          T* gx = xn->ensure_grad().data() + s * in_plane;
          if (geo.pointwise()) {
            Map<T>(gx, rows, cols).noalias() += K.transpose() * G;
          } else {
            Map<T>(dcol.data(), rows, cols).noalias() = K.transpose() * G;
            col2im_add(dcol.data(), geo, gx);
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input) {
  require(input.rank() >= 2, "avg_pool2d: input must have spatial axes, got " + shape_str(input.shape()));
  const std::size_t h = input.dim(input.rank() - 2), w = input.dim(input.rank() - 1);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2d: odd spatial extent in " + shape_str(input.shape()));
  const std::size_t planes = input.numel() / (h * w);
  const std::size_t ho = h / 2, wo = w / 2;
  detail::Buffer<T> out(planes * ho * wo);
  auto xs = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xs.data() + p * h * w;
    T* dst = out.data() + p * ho * wo;
    for (std::size_t y = 0; y < ho; ++y) {
      const T* r0 = src + 2 * y * w;
      const T* r1 = r0 + w;
      for (std::size_t x = 0; x < wo; ++x) {
        dst[y * wo + x] = (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) * T(0.25);
      }
    }
  }
  Shape shape = input.shape();
  shape[shape.size() - 2] = ho;
  shape[shape.size() - 1] = wo;
  Tensor<T> y = make_output(std::move(shape), std::move(out), "avg_pool2d", {&input});
  if (tracking({&input})) {
    NodePtr<T> xn = input.node();
    record(y, [xn, planes, h, w, ho, wo](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      for (std::size_t p = 0; p < planes; ++p) {
        T* dst = gx.data() + p * h * w;
        const T* src = g.data() + p * ho * wo;
        for (std::size_t y = 0; y < ho; ++y) {
          for (std::size_t x = 0; x < wo; ++x) {
            const T q = src[y * wo + x] * T(0.25);
            dst[2 * y * w + 2 * x] += q;
            dst[2 * y * w + 2 * x + 1] += q;
            dst[(2 * y + 1) * w + 2 * x] += q;
            dst[(2 * y + 1) * w + 2 * x + 1] += q;
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require(input.rank() == 3 || input.rank() == 4,
          "global_avg_pool: input must be [C x H x W] or [N x C x H x W], got " + shape_str(input.shape()));
  const std::size_t r = input.rank();
  const std::size_t area = input.dim(r - 1) * input.dim(r - 2);
  const std::size_t planes = input.numel() / area;
  detail::Buffer<T> out(planes);
  auto xs = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0;
    for (std::size_t i = 0; i < area; ++i) acc += xs[p * area + i];
    out[p] = static_cast<T>(acc / static_cast<double>(area));
  }
  Shape shape(input.shape().begin(), input.shape().end() - 2);
  Tensor<T> y = make_output(std::move(shape), std::move(out), "global_avg_pool", {&input});
  if (tracking({&input})) {
    NodePtr<T> xn = input.node();
    record(y, [xn, planes, area](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      const T inv = T(1) / static_cast<T>(area);
      for (std::size_t p = 0; p < planes; ++p) {
        const T q = g[p] * inv;
        for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += q;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                     Mode mode) {
  require(x.rank() == 4, "batch_norm: input must be [N x C x H x W], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), area = x.dim(2) * x.dim(3);
  require(gamma.shape() == Shape{c} && beta.shape() == Shape{c},
          "batch_norm: scale/shift must be [" + std::to_string(c) + "], got " + shape_str(gamma.shape()) + " and " +
              shape_str(beta.shape()));
  require(stats.running_mean.size() == c && stats.running_var.size() == c,
          "batch_norm: running moments sized " + std::to_string(stats.running_mean.size()) + " for " +
              std::to_string(c) + " channels");
  if (mode == Mode::train && n < 2) {
    throw ConfigError("batch_norm: train mode needs a batch of at least 2, got " + std::to_string(n));
  }
  const std::size_t count = n * area;
  auto xs = x.data();
  auto gs = gamma.data();
  auto bs = beta.data();
  detail::Buffer<T> xhat(x.numel());
  detail::Buffer<T> inv_std(c);
  detail::Buffer<T> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == Mode::train) {
      double acc = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = xs.data() + (s * c + ch) * area;
        for (std::size_t i = 0; i < area; ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = xs.data() + (s * c + ch) * area;
        for (std::size_t i = 0; i < area; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      stats.running_mean[ch] =
          static_cast<T>(kBatchNormMomentum * stats.running_mean[ch] + (1.0 - kBatchNormMomentum) * mu);
      stats.running_var[ch] =
          static_cast<T>(kBatchNormMomentum * stats.running_var[ch] + (1.0 - kBatchNormMomentum) * unbiased);
    } else {
      mu = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
    inv_std[ch] = static_cast<T>(inv);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = (s * c + ch) * area;
      for (std::size_t i = 0; i < area; ++i) {
        const T h = static_cast<T>((xs[base + i] - mu) * inv);
        xhat[base + i] = h;
        out[base + i] = gs[ch] * h + bs[ch];
      }
    }
  }
  Tensor<T> y = make_output(x.shape(), std::move(out), "batch_norm", {&x, &gamma, &beta});
  if (tracking({&x, &gamma, &beta})) {
    NodePtr<T> xn = x.node(), gn = gamma.node(), bn = beta.node();
    record(y, [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), mode, n, c, area,
               count](std::span<const T> g) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0, sum_gh = 0;
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t base = (s * c + ch) * area;
          for (std::size_t i = 0; i < area; ++i) {
            sum_g += g[base + i];
            sum_gh += static_cast<double>(g[base + i]) * xhat[base + i];
          }
        }
        if (gn->requires_grad) gn->ensure_grad()[ch] += static_cast<T>(sum_gh);
        if (bn->requires_grad) bn->ensure_grad()[ch] += static_cast<T>(sum_g);
        if (!xn->requires_grad) continue;
        auto gx = xn->ensure_grad();
        const double scale_ch = static_cast<double>(gn->data[ch]) * inv_std[ch];
        const double mean_g = sum_g / static_cast<double>(count);
        const double mean_gh = sum_gh / static_cast<double>(count);
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t base = (s * c + ch) * area;
          for (std::size_t i = 0; i < area; ++i) {
            if (mode == Mode::train) {
              gx[base + i] += static_cast<T>(scale_ch * (g[base + i] - mean_g - xhat[base + i] * mean_gh));
            } else {
              gx[base + i] += static_cast<T>(scale_ch * g[base + i]);
            }
          }
        }
      }
    });
  }
  return y;
}

namespace {
thread_local ReluPatternProbe* relu_probe = nullptr;
}

ReluPatternProbe::ReluPatternProbe() : previous_(relu_probe) { relu_probe = this; }
ReluPatternProbe::~ReluPatternProbe() { relu_probe = previous_; }

template <typename T>
void ReluPatternProbe::fold(std::span<const T> values) {
  // FNV-1a over one bit per element, eight elements per byte.
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    byte = static_cast<std::uint8_t>((byte << 1) | (values[i] > T(0) ? 1 : 0));
    if (i % 8 == 7 || i + 1 == values.size()) {
      hash_ = (hash_ ^ byte) * 1099511628211ull;
      byte = 0;
    }
  }
  hash_ = (hash_ ^ values.size()) * 1099511628211ull;
}

template void ReluPatternProbe::fold<float>(std::span<const float>);
template void ReluPatternProbe::fold<double>(std::span<const double>);

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  if (relu_probe != nullptr) relu_probe->fold(x.data());
  return unary(
      x, "relu", [](T v) { return v < T(0) ? T(0) : v; }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  return unary(
      x, "one_minus", [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> smooth_l1(const Tensor<T>& x) {
  constexpr T knee = T(0.01);
  return unary(
      x, "smooth_l1",
      [](T v) {
        const T a = std::abs(v);
        return a < knee ? T(0.5) * v * v : knee * (a - T(0.005));
      },
      [](T v, T) {
        if (std::abs(v) < knee) return v;
        return v > T(0) ? knee : -knee;
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  detail::Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor<T> y = make_output(a.shape(), std::move(out), "add", {&a, &b});
  if (tracking({&a, &b})) {
    NodePtr<T> an = a.node(), bn = b.node();
    record(y, [an, bn](std::span<const T> g) {
      for (auto* node : {an.get(), bn.get()}) {
        if (!node->requires_grad) continue;
        auto gx = node->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  detail::Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor<T> y = make_output(a.shape(), std::move(out), "sub", {&a, &b});
  if (tracking({&a, &b})) {
    NodePtr<T> an = a.node(), bn = b.node();
    record(y, [an, bn](std::span<const T> g) {
      if (an->requires_grad) {
        auto ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  detail::Buffer<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor<T> y = make_output(a.shape(), std::move(out), "mul", {&a, &b});
  if (tracking({&a, &b})) {
    NodePtr<T> an = a.node(), bn = b.node();
    record(y, [an, bn](std::span<const T> g) {
      if (an->requires_grad) {
        auto ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  require(axis < ref.size(), "concat: axis " + std::to_string(axis) + " out of range for " + shape_str(ref));
  std::size_t outer = 1, inner = 1, joined = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> chunk;
  for (const Tensor<T>& p : parts) {
    bool ok = p.rank() == ref.size();
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = (i == axis) || p.dim(i) == ref[i];
    require(ok, "concat: " + shape_str(p.shape()) + " incompatible with " + shape_str(ref) + " along axis " +
                    std::to_string(axis));
    joined += p.dim(axis);
    chunk.push_back(p.dim(axis) * inner);
  }
  const std::size_t row = joined * inner;
  detail::Buffer<T> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * chunk[k], chunk[k], out.data() + o * row + offset);
    }
    offset += chunk[k];
  }
  Shape shape = ref;
  shape[axis] = joined;
  Tensor<T> y = make_output(std::move(shape), std::move(out), "concat", {});
  bool any = false;
  if (Tape<T>::active() != nullptr) {
    for (const Tensor<T>& p : parts) any = any || p.requires_grad();
  }
  if (any) {
    std::vector<NodePtr<T>> nodes;
    for (const Tensor<T>& p : parts) nodes.push_back(p.node());
    record(y, [nodes, chunk, outer, row](std::span<const T> g) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k]->requires_grad) {
          auto gx = nodes[k]->ensure_grad();
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = g.data() + o * row + offset;
            T* dst = gx.data() + o * chunk[k];
            for (std::size_t i = 0; i < chunk[k]; ++i) dst[i] += src[i];
          }
        }
        offset += chunk[k];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < x.rank(), "slice: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
  require(begin < end && end <= x.dim(axis), "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                                 ") invalid for " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t src_row = x.dim(axis) * inner, len = (end - begin) * inner, first = begin * inner;
  detail::Buffer<T> out(outer * len);
  auto xs = x.data();
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(xs.data() + o * src_row + first, len, out.data() + o * len);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  Tensor<T> y = make_output(std::move(shape), std::move(out), "slice", {&x});
  if (tracking({&x})) {
    NodePtr<T> xn = x.node();
    record(y, [xn, outer, src_row, len, first](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < len; ++i) gx[o * src_row + first + i] += g[o * len + i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  detail::Buffer<T> out(x.data().begin(), x.data().end());
  Tensor<T> y = make_output(std::move(shape), std::move(out), "reshape", {&x});
  if (tracking({&x})) {
    NodePtr<T> xn = x.node();
    record(y, [xn](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  Tensor<T> y = make_output(Shape{}, detail::Buffer<T>{static_cast<T>(acc)}, "sum", {&x});
  if (tracking({&x})) {
    NodePtr<T> xn = x.node();
    record(y, [xn](std::span<const T> g) {
      auto gx = xn->ensure_grad();
      for (T& v : gx) v += g[0];
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

#define HCRNN_INSTANTIATE_OPS(T)                                                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);   \
  template Tensor<T> avg_pool2d(const Tensor<T>&);                                                             \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                        \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&, Mode); \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                \
  template Tensor<T> tanh(const Tensor<T>&);                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> one_minus(const Tensor<T>&);                                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                                               \
  template Tensor<T> smooth_l1(const Tensor<T>&);                                                              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                                       \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> mean(const Tensor<T>&);

HCRNN_INSTANTIATE_OPS(float)
HCRNN_INSTANTIATE_OPS(double)

#undef HCRNN_INSTANTIATE_OPS

}  // namespace hcrnn
