// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfsam/tensor.hpp"

// Differentiable operations. Every op checks its shape contract (ShapeError),
// rejects non-finite results (NonFiniteError) and records itself on the tape
// of any grad-requiring input.
namespace cfsam {

/// 2-D convolution over an H x W x Cin map with a k x k x Cin x Cout kernel.
/// Output is H' x W' x Cout, H' = (H + 2*padding - k) / stride + 1.
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                      std::size_t padding, std::size_t stride = 1);

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Max-subtracted softmax along the last axis.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

/// Normalizes over the last axis (biased variance), then scales by gamma and shifts by beta.
template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps);

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, std::size_t axis);

template <class T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
  return concat(std::span<const BasicTensor<T>>(parts), axis);
}

template <class T>
BasicTensor<T> slice(const BasicTensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

template <class T>
BasicTensor<T> transpose2d(const BasicTensor<T>& x);

/// Gathers slices along `axis` in the order given by `indices` (repeats allowed).
template <class T>
BasicTensor<T> index_select(const BasicTensor<T>& x, std::size_t axis, std::span<const std::size_t> indices);

/// Align-corners linear resampling of a C x Lin sequence to C x Lout.
template <class T>
BasicTensor<T> interp_linear_1d(const BasicTensor<T>& x, std::size_t out_length);

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);

/// x[..., j] + bias[j]; bias length must equal the last dimension of x.
template <class T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x);

/// Mean over axis 0 of a rank-2 tensor: N x C -> C.
template <class T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x);

}  // namespace cfsam
