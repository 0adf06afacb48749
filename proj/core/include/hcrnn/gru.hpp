#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcrnn/rng.hpp"
#include "hcrnn/tensor.hpp"

namespace hcrnn {

/// Gated recurrent unit with a linear readout:
///
///   r_t  = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
///   z_t  = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
///   h~_t = tanh(W_h x_t + r_t * (U_h h_{t-1}) + b_h)
///   h_t  = z_t * h_{t-1} + (1 - z_t) * h~_t
///   y_t  = W_y h_t + b_y
///
/// Note the update gate z_t weights the previous state; this is the opposite
/// of the convention in some GRU formulations and is kept deliberately.
/// The readout (W_y, b_y) is shared by every step of a sequence.
template <typename T>
struct GruParams {
  Tensor<T> w_r, w_z, w_h;  // [d_h x d_in]
  Tensor<T> u_r, u_z, u_h;  // [d_h x d_h]
  Tensor<T> b_r, b_z, b_h;  // [d_h]
  Tensor<T> w_y;            // [d_out x d_h]
  Tensor<T> b_y;            // [d_out]

  std::size_t input_size() const { return w_r.dim(1); }
  std::size_t hidden_size() const { return w_r.dim(0); }
  std::size_t output_size() const { return w_y.dim(0); }

  /// Throws DimensionError when the weight groups disagree on d_in/d_h.
  void validate() const;

  static GruParams zeros(std::size_t d_in, std::size_t d_h, std::size_t d_out);
  /// Weights uniform in +-sqrt(1/d_h), biases zero.
  static GruParams random(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng);

  /// Stable (suffix, tensor) pairs in declaration order.
  std::vector<std::pair<std::string, Tensor<T>*>> named();
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const;
};

template <typename T>
struct GruState {
  Tensor<T> h;

  /// Zero state, [d_h] or [batch x d_h].
  static GruState zeros(std::size_t d_h, std::size_t batch = 0);
};

template <typename T>
struct GruStep {
  GruState<T> state;
  Tensor<T> output;
  // Gate activations, kept for inspection.
  Tensor<T> reset, update, candidate;
};

template <typename T>
struct GruSequence {
  std::vector<Tensor<T>> outputs;
  GruState<T> final_state;
};

/// One recurrence step; x is [d_in] or [batch x d_in], matching h_prev's rank.
template <typename T>
GruStep<T> gru_step(const GruParams<T>& params, const GruState<T>& h_prev, const Tensor<T>& x);

/// Runs gru_step over `inputs` starting from the zero state.
template <typename T>
GruSequence<T> gru_unroll(const GruParams<T>& params, std::span<const Tensor<T>> inputs);

/// Same as above but continues from `initial`.
template <typename T>
GruSequence<T> gru_unroll(const GruParams<T>& params, std::span<const Tensor<T>> inputs,
                          const GruState<T>& initial);

extern template struct GruParams<float>;
extern template struct GruParams<double>;

}  // namespace hcrnn
