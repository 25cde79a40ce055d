// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace cfsam {

using Shape = std::vector<std::size_t>;

enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
std::string_view precision_name(Precision precision);
Precision parse_precision(std::string_view name);

template <class T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

template <class T>
class BasicTensor;
template <class T>
class GradTape;

namespace detail {

template <class T>
struct TapeState;

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  // Empty until a gradient is accumulated.
  std::vector<T> grad;
  bool requires_grad = false;
  std::weak_ptr<TapeState<T>> tape;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <class T>
struct TapeRecord {
  std::string_view op;
  std::shared_ptr<TensorNode<T>> output;
  // Reads output->grad and accumulates into the inputs it captured.
  std::function<void(const TensorNode<T>&)> backward;
};

template <class T>
struct TapeState {
  std::vector<TapeRecord<T>> records;
  std::vector<std::shared_ptr<TensorNode<T>>> leaves;
  bool backward_done = false;
  std::size_t last_visits = 0;
};

template <class T>
struct TensorAccess;

}  // namespace detail

/// Dense row-major tensor. Data is immutable after construction; only the
/// gradient accumulator changes, and only through a GradTape.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor from(Shape shape, std::vector<T> data);
  static BasicTensor zeros(Shape shape);
  static BasicTensor full(Shape shape, T value);
  static BasicTensor scalar(T value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const T> grad() const;
  /// Gradient as a standalone tensor (zeros if nothing was accumulated).
  BasicTensor grad_tensor() const;

  /// Same values, no tape attachment.
  BasicTensor detach() const;

  template <class U>
  BasicTensor<U> cast() const {
    auto src = data();
    return BasicTensor<U>::from(shape(), std::vector<U>(src.begin(), src.end()));
  }

  /// Bit-exact equality of shape and values.
  bool identical(const BasicTensor& other) const;

 private:
  friend struct detail::TensorAccess<T>;
  friend class GradTape<T>;

  explicit BasicTensor(std::shared_ptr<detail::TensorNode<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::TensorNode<T>> node_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

/// Define-by-run gradient tape. Tensors derived from watched leaves are
/// recorded in execution order; backward() replays that order in reverse.
template <class T>
class GradTape {
 public:
  GradTape();

  /// Registers a copy of `value` as a differentiable leaf on this tape.
  BasicTensor<T> watch(const BasicTensor<T>& value);

  void backward(const BasicTensor<T>& loss);

  /// Clears all accumulated gradients so backward() may be called again.
  void reset();

  std::size_t size() const;
  std::size_t last_backward_visits() const;

 private:
  std::shared_ptr<detail::TapeState<T>> state_;
};

namespace testing {

/// Test hook: while alive, the backward pass of every op named `op` on this
/// thread receives its upstream gradient multiplied by `scale`.
class ScopedBackwardFault {
 public:
  ScopedBackwardFault(std::string op, double scale = 1.5);
  ~ScopedBackwardFault();
  ScopedBackwardFault(const ScopedBackwardFault&) = delete;
  ScopedBackwardFault& operator=(const ScopedBackwardFault&) = delete;

 private:
  std::string previous_op_;
  double previous_scale_;
};

}  // namespace testing

namespace detail {

template <class T>
struct TensorAccess {
  static const std::shared_ptr<TensorNode<T>>& node(const BasicTensor<T>& t) { return t.node_; }
  static BasicTensor<T> wrap(std::shared_ptr<TensorNode<T>> node) { return BasicTensor<T>(std::move(node)); }
};

}  // namespace detail

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace cfsam
