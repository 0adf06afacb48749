#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "hcrnn/error.hpp"

namespace hcrnn {

using Shape = std::vector<std::size_t>;

/// Product of extents; 1 for the rank-0 scalar shape.
std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

// Storage starts on a 64-byte boundary so that vectorized kernels split
// their loops the same way on every run; summation order, and therefore
// the last bits of a result, would otherwise depend on heap addresses.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  bool leaf = true;
  std::string name;
  Tape<T>* tape = nullptr;  // set for op outputs recorded on an active tape

  std::span<T> ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

/// Dense row-major array. Copies share storage; use clone() for a deep copy.
///
/// A tensor either is a leaf (created by the user, e.g. a parameter) or the
/// output of an op. Op outputs participate in reverse-mode differentiation
/// when a Tape is active on the current thread and at least one input
/// requires a gradient.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values);
  explicit Tensor(detail::NodePtr<T> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  /// Writable view of a leaf's values (parameter updates, test fixtures).
  std::span<T> mutable_data();
  T item() const;
  T operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; all zeros when no gradient has reached the tensor.
  std::vector<T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  const std::string& name() const { return node_->name; }
  Tensor& set_name(std::string name);

  /// Deep copy as a new leaf without gradient state.
  Tensor clone() const;

  const detail::NodePtr<T>& node() const { return node_; }

 private:
  detail::NodePtr<T> node_;
};

/// Ordered record of differentiable ops.
///
/// Constructing a Tape makes it the active tape of the calling thread until
/// it is destroyed; the previously active tape is restored afterwards.
/// A tape is consumed by backward() and cannot be replayed.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const detail::NodePtr<T>& output, BackwardFn fn);
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  /// Seeds d(seed)/d(seed) = 1 and replays the recorded ops in reverse.
  void backward(const Tensor<T>& seed);

 private:
  struct Entry {
    detail::NodePtr<T> output;
    BackwardFn fn;
  };

  void release();

  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
  bool consumed_ = false;
};

/// Runs reverse-mode differentiation from a scalar produced under a tape.
template <typename T>
void backward(const Tensor<T>& seed);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace hcrnn
