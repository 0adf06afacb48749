#include "hcrnn/gru.hpp"

#include <cmath>

#include "hcrnn/ops.hpp"

namespace hcrnn {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError("gru: " + msg);
}

}  // namespace

template <typename T>
void GruParams<T>::validate() const {
  for (const auto& [name, t] : named()) require(t->defined(), name + " is undefined");
  const std::size_t d_h = w_r.dim(0), d_in = w_r.dim(1);
  for (const Tensor<T>* w : {&w_r, &w_z, &w_h}) {
    require(w->shape() == Shape{d_h, d_in}, "input weights disagree: " + shape_str(w->shape()) + " vs " +
                                                shape_str(Shape{d_h, d_in}));
  }
  for (const Tensor<T>* u : {&u_r, &u_z, &u_h}) {
    require(u->shape() == Shape{d_h, d_h}, "recurrent weight " + shape_str(u->shape()) + " for d_h=" +
                                               std::to_string(d_h));
  }
  for (const Tensor<T>* b : {&b_r, &b_z, &b_h}) {
    require(b->shape() == Shape{d_h}, "gate bias " + shape_str(b->shape()) + " for d_h=" + std::to_string(d_h));
  }
  require(w_y.rank() == 2 && w_y.dim(1) == d_h, "readout weight " + shape_str(w_y.shape()));
  require(b_y.shape() == Shape{w_y.dim(0)}, "readout bias " + shape_str(b_y.shape()));
}

template <typename T>
GruParams<T> GruParams<T>::zeros(std::size_t d_in, std::size_t d_h, std::size_t d_out) {
  GruParams p;
  p.w_r = Tensor<T>::zeros({d_h, d_in});
  p.w_z = Tensor<T>::zeros({d_h, d_in});
  p.w_h = Tensor<T>::zeros({d_h, d_in});
  p.u_r = Tensor<T>::zeros({d_h, d_h});
  p.u_z = Tensor<T>::zeros({d_h, d_h});
  p.u_h = Tensor<T>::zeros({d_h, d_h});
  p.b_r = Tensor<T>::zeros({d_h});
  p.b_z = Tensor<T>::zeros({d_h});
  p.b_h = Tensor<T>::zeros({d_h});
  p.w_y = Tensor<T>::zeros({d_out, d_h});
  p.b_y = Tensor<T>::zeros({d_out});
  return p;
}

template <typename T>
GruParams<T> GruParams<T>::random(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng) {
  GruParams p = zeros(d_in, d_h, d_out);
  const double bound = std::sqrt(1.0 / static_cast<double>(d_h));
  for (Tensor<T>* w : {&p.w_r, &p.w_z, &p.w_h, &p.u_r, &p.u_z, &p.u_h, &p.w_y}) {
    fill_uniform(w->mutable_data(), bound, rng);
  }
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> GruParams<T>::named() {
  return {{"W_r", &w_r}, {"W_z", &w_z}, {"W_h", &w_h}, {"U_r", &u_r}, {"U_z", &u_z}, {"U_h", &u_h},
          {"b_r", &b_r}, {"b_z", &b_z}, {"b_h", &b_h}, {"W_y", &w_y}, {"b_y", &b_y}};
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> GruParams<T>::named() const {
  return {{"W_r", &w_r}, {"W_z", &w_z}, {"W_h", &w_h}, {"U_r", &u_r}, {"U_z", &u_z}, {"U_h", &u_h},
          {"b_r", &b_r}, {"b_z", &b_z}, {"b_h", &b_h}, {"W_y", &w_y}, {"b_y", &b_y}};
}

template <typename T>
GruState<T> GruState<T>::zeros(std::size_t d_h, std::size_t batch) {
  return GruState{batch == 0 ? Tensor<T>::zeros({d_h}) : Tensor<T>::zeros({batch, d_h})};
}

template <typename T>
GruStep<T> gru_step(const GruParams<T>& params, const GruState<T>& h_prev, const Tensor<T>& x) {
  const std::size_t d_h = params.hidden_size();
  require(x.rank() == h_prev.h.rank(),
          "input " + shape_str(x.shape()) + " and state " + shape_str(h_prev.h.shape()) + " differ in rank");
  require(h_prev.h.shape().back() == d_h, "state " + shape_str(h_prev.h.shape()) + " for d_h=" + std::to_string(d_h));
  if (x.rank() == 2) {
    require(x.dim(0) == h_prev.h.dim(0), "batch of input " + shape_str(x.shape()) + " vs state " +
                                             shape_str(h_prev.h.shape()));
  }
  const Tensor<T>& h = h_prev.h;
  Tensor<T> r = sigmoid(add(linear(x, params.w_r, params.b_r), linear(h, params.u_r)));
  Tensor<T> z = sigmoid(add(linear(x, params.w_z, params.b_z), linear(h, params.u_z)));
  Tensor<T> candidate = tanh(add(linear(x, params.w_h, params.b_h), mul(r, linear(h, params.u_h))));
  Tensor<T> next = add(mul(z, h), mul(one_minus(z), candidate));
  Tensor<T> y = linear(next, params.w_y, params.b_y);
  return GruStep<T>{GruState<T>{next}, y, r, z, candidate};
}

template <typename T>
GruSequence<T> gru_unroll(const GruParams<T>& params, std::span<const Tensor<T>> inputs,
                          const GruState<T>& initial) {
  if (inputs.empty()) throw UsageError("gru_unroll: empty input sequence");
  GruSequence<T> seq;
  seq.final_state = initial;
  seq.outputs.reserve(inputs.size());
  for (const Tensor<T>& x : inputs) {
    GruStep<T> step = gru_step(params, seq.final_state, x);
    seq.outputs.push_back(step.output);
    seq.final_state = step.state;
  }
  return seq;
}

template <typename T>
GruSequence<T> gru_unroll(const GruParams<T>& params, std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw UsageError("gru_unroll: empty input sequence");
  const Tensor<T>& first = inputs.front();
  const std::size_t batch = first.rank() == 2 ? first.dim(0) : 0;
  return gru_unroll(params, inputs, GruState<T>::zeros(params.hidden_size(), batch));
}

template struct GruParams<float>;
template struct GruParams<double>;
template struct GruState<float>;
template struct GruState<double>;
template GruStep<float> gru_step(const GruParams<float>&, const GruState<float>&, const Tensor<float>&);
template GruStep<double> gru_step(const GruParams<double>&, const GruState<double>&, const Tensor<double>&);
template GruSequence<float> gru_unroll(const GruParams<float>&, std::span<const Tensor<float>>);
template GruSequence<double> gru_unroll(const GruParams<double>&, std::span<const Tensor<double>>);
template GruSequence<float> gru_unroll(const GruParams<float>&, std::span<const Tensor<float>>,
                                       const GruState<float>&);
template GruSequence<double> gru_unroll(const GruParams<double>&, std::span<const Tensor<double>>,
                                        const GruState<double>&);

}  // namespace hcrnn
