// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cfsam/errors.hpp"
#include "cfsam/tensor.hpp"

namespace cfsam::detail {

template <class T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <class T>
const NodePtr<T>& node_of(const BasicTensor<T>& t) {
  if (!t.defined()) throw ShapeError("operation on an undefined tensor");
  return TensorAccess<T>::node(t);
}

template <class T>
void require_finite(std::string_view op, const std::vector<T>& data) {
  for (const T v : data) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(op) + ": non-finite value in result");
    }
  }
}

// Returns the live tape shared by all grad-requiring inputs, or null if none.
template <class T>
std::shared_ptr<TapeState<T>> common_tape(std::string_view op, std::initializer_list<const NodePtr<T>*> inputs) {
  std::shared_ptr<TapeState<T>> tape;
  for (const NodePtr<T>* in : inputs) {
    if (!(*in)->requires_grad) continue;
    auto candidate = (*in)->tape.lock();
    if (!candidate) continue;
    if (tape && tape != candidate) {
      throw AutogradError(std::string(op) + ": inputs belong to different gradient tapes");
    }
    tape = std::move(candidate);
  }
  return tape;
}

template <class T>
std::shared_ptr<TapeState<T>> common_tape(std::string_view op, const std::vector<NodePtr<T>>& inputs) {
  std::shared_ptr<TapeState<T>> tape;
  for (const auto& in : inputs) {
    if (!in->requires_grad) continue;
    auto candidate = in->tape.lock();
    if (!candidate) continue;
    if (tape && tape != candidate) {
      throw AutogradError(std::string(op) + ": inputs belong to different gradient tapes");
    }
    tape = std::move(candidate);
  }
  return tape;
}

// Builds the result node; attaches `backward` to the tape when one is live.
template <class T, class Backward>
BasicTensor<T> emit(std::string_view op, Shape shape, std::vector<T> data,
                    std::shared_ptr<TapeState<T>> tape, Backward&& backward) {
  require_finite(op, data);
  auto out = std::make_shared<TensorNode<T>>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  if (tape) {
    out->requires_grad = true;
    out->tape = tape;
    tape->records.push_back(TapeRecord<T>{op, out, std::forward<Backward>(backward)});
  }
  return TensorAccess<T>::wrap(std::move(out));
}

template <class T>
bool wants_grad(const NodePtr<T>& n) {
  return n->requires_grad && !n->tape.expired();
}

}  // namespace cfsam::detail
