// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "autograd_internal.hpp"

namespace cfsam {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string_view precision_name(Precision precision) {
  return precision == Precision::f32 ? "f32" : "f64";
}

Precision parse_precision(std::string_view name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + std::string(name) + "' (expected f32 or f64)");
}

namespace {

thread_local std::string g_fault_op;
thread_local double g_fault_scale = 1.0;

}  // namespace

namespace testing {

ScopedBackwardFault::ScopedBackwardFault(std::string op, double scale)
    : previous_op_(std::exchange(g_fault_op, std::move(op))),
      previous_scale_(std::exchange(g_fault_scale, scale)) {}

ScopedBackwardFault::~ScopedBackwardFault() {
  g_fault_op = std::move(previous_op_);
  g_fault_scale = previous_scale_;
}

}  // namespace testing

template <class T>
BasicTensor<T> BasicTensor<T>::from(Shape shape, std::vector<T> data) {
  for (const std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  detail::require_finite("tensor", data);
  auto node = std::make_shared<detail::TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return BasicTensor(std::move(node));
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value));
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return from({}, {value});
}

template <class T>
const Shape& BasicTensor<T>::shape() const {
  return detail::node_of(*this)->shape;
}

template <class T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

template <class T>
std::size_t BasicTensor<T>::numel() const {
  return detail::node_of(*this)->data.size();
}

template <class T>
std::span<const T> BasicTensor<T>::data() const {
  return detail::node_of(*this)->data;
}

template <class T>
T BasicTensor<T>::item() const {
  const auto& n = detail::node_of(*this);
  if (n->data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(n->shape));
  return n->data[0];
}

template <class T>
T BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  const auto& n = detail::node_of(*this);
  if (index.size() != n->shape.size()) throw ShapeError("at(): index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (const std::size_t i : index) {
    if (i >= n->shape[axis]) throw ShapeError("at(): index out of range");
    flat = flat * n->shape[axis] + i;
    ++axis;
  }
  return n->data[flat];
}

template <class T>
bool BasicTensor<T>::requires_grad() const {
  return detail::node_of(*this)->requires_grad;
}

template <class T>
bool BasicTensor<T>::has_grad() const {
  return !detail::node_of(*this)->grad.empty();
}

template <class T>
std::span<const T> BasicTensor<T>::grad() const {
  return detail::node_of(*this)->grad;
}

template <class T>
BasicTensor<T> BasicTensor<T>::grad_tensor() const {
  const auto& n = detail::node_of(*this);
  if (n->grad.empty()) return zeros(n->shape);
  return from(n->shape, n->grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const {
  const auto& n = detail::node_of(*this);
  return from(n->shape, n->data);
}

template <class T>
bool BasicTensor<T>::identical(const BasicTensor& other) const {
  const auto& a = detail::node_of(*this);
  const auto& b = detail::node_of(other);
  if (a->shape != b->shape) return false;
  // Bitwise comparison: distinguishes -0.0 from 0.0.
  return std::memcmp(a->data.data(), b->data.data(), a->data.size() * sizeof(T)) == 0;
}

template <class T>
GradTape<T>::GradTape() : state_(std::make_shared<detail::TapeState<T>>()) {}

template <class T>
BasicTensor<T> GradTape<T>::watch(const BasicTensor<T>& value) {
  const auto& src = detail::node_of(value);
  auto leaf = std::make_shared<detail::TensorNode<T>>();
  leaf->shape = src->shape;
  leaf->data = src->data;
  leaf->requires_grad = true;
  leaf->tape = state_;
  state_->leaves.push_back(leaf);
  return BasicTensor<T>(std::move(leaf));
}

template <class T>
void GradTape<T>::backward(const BasicTensor<T>& loss) {
  const auto& root = detail::node_of(loss);
  if (root->data.size() != 1) {
    throw AutogradError("backward() needs a scalar loss, got shape " + shape_to_string(root->shape));
  }
  if (state_->backward_done) {
    throw AutogradError("backward() called twice without reset()");
  }
  if (!root->requires_grad || root->tape.lock() != state_) {
    throw AutogradError("backward(): loss is not recorded on this tape");
  }
  auto& records = state_->records;
  auto it = std::find_if(records.rbegin(), records.rend(),
                         [&](const detail::TapeRecord<T>& r) { return r.output == root; });
  state_->backward_done = true;
  state_->last_visits = 0;
  root->ensure_grad()[0] += T(1);
  if (it == records.rend()) return;  // the loss is itself a leaf

  // Records are in execution order, which is topological; walking backwards
  // from the loss visits each reachable node after all of its consumers.
  for (; it != records.rend(); ++it) {
    detail::TapeRecord<T>& rec = *it;
    if (rec.output->grad.empty()) continue;
    ++state_->last_visits;
    if (!g_fault_op.empty() && rec.op == g_fault_op) {
      std::vector<T> saved = rec.output->grad;
      for (T& g : rec.output->grad) g = static_cast<T>(g * g_fault_scale);
      rec.backward(*rec.output);
      rec.output->grad = std::move(saved);
    } else {
      rec.backward(*rec.output);
    }
  }
}

template <class T>
void GradTape<T>::reset() {
  for (auto& rec : state_->records) rec.output->grad.clear();
  for (auto& leaf : state_->leaves) leaf->grad.clear();
  state_->backward_done = false;
  state_->last_visits = 0;
}

template <class T>
std::size_t GradTape<T>::size() const {
  return state_->records.size();
}

template <class T>
std::size_t GradTape<T>::last_backward_visits() const {
  return state_->last_visits;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class GradTape<float>;
template class GradTape<double>;

}  // namespace cfsam
