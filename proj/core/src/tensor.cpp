#include "hcrnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hcrnn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("zero extent in shape " + shape_str(shape));
  }
}

template <typename T>
thread_local Tape<T>* active_tape = nullptr;

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) {
  check_extents(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor literal");
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data.assign(values.begin(), values.end());
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(Shape{}, std::vector<T>{value});
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->leaf) throw UsageError("mutable_data() on non-leaf tensor '" + node_->name + "'");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!node_->leaf) throw UsageError("set_requires_grad() on non-leaf tensor");
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
  return *this;
}

template <typename T>
std::vector<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return std::vector<T>(node_->data.size(), T(0));
  return std::vector<T>(node_->grad.begin(), node_->grad.end());
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  return node_->ensure_grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T>& Tensor<T>::set_name(std::string name) {
  node_->name = std::move(name);
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor copy(shape(), std::vector<T>(node_->data.begin(), node_->data.end()));
  copy.node_->name = node_->name;
  return copy;
}

template <typename T>
Tape<T>::Tape() : previous_(active_tape<T>) {
  active_tape<T> = this;
}

template <typename T>
Tape<T>::~Tape() {
  release();
  active_tape<T> = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_tape<T>;
}

template <typename T>
void Tape<T>::record(const detail::NodePtr<T>& output, BackwardFn fn) {
  if (consumed_) throw UsageError("recording onto a consumed tape");
  output->requires_grad = true;
  output->leaf = false;
  output->tape = this;
  entries_.push_back(Entry{output, std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& seed) {
  if (!seed.defined() || seed.numel() != 1) {
    throw UsageError("backward seed must be a scalar, got " +
                     (seed.defined() ? shape_str(seed.shape()) : std::string("undefined tensor")));
  }
  if (seed.node()->tape != this) throw UsageError("backward seed was not recorded on this tape");
  if (consumed_) throw UsageError("tape already consumed by a previous backward pass");
  seed.node()->ensure_grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->fn(it->output->grad);
  }
  consumed_ = true;
  release();
}

template <typename T>
void Tape<T>::release() {
  for (Entry& e : entries_) e.output->tape = nullptr;
  entries_.clear();
}

template <typename T>
void backward(const Tensor<T>& seed) {
  if (!seed.defined()) throw UsageError("backward on undefined tensor");
  if (seed.numel() != 1) throw UsageError("backward seed must be a scalar, got " + shape_str(seed.shape()));
  Tape<T>* tape = seed.node()->tape;
  if (tape == nullptr) throw UsageError("backward seed is detached: it was not produced under an active tape");
  tape->backward(seed);
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace hcrnn
