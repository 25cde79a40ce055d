// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfsam/config.hpp"
#include "cfsam/tensor.hpp"
#include "cfsam/weights.hpp"

// Cross-layer feature self-attention: per-scale convolutional extraction,
// one flattened cross-scale token sequence processed by a transformer over
// interleaved partitions, and a fused projection back to the input pyramid.
//
// Layouts: maps are H x W x C, sequences are C x Length, partition blocks
// are Part x (PaddedLength / Part) x C.
namespace cfsam {

template <class T>
struct PartitionedSequence {
  BasicTensor<T> blocks;
  std::size_t original_length = 0;
  std::size_t padded_length = 0;
  std::size_t part = 1;

  std::size_t block_length() const { return padded_length / part; }
};

/// Smallest multiple of `part` that is >= `length`.
std::size_t padded_length(std::size_t length, std::size_t part);

/// Row r of the stacked blocks holds padded token interval_indices(...)[r];
/// block p takes tokens p, p + part, p + 2 * part, ...
std::vector<std::size_t> interval_indices(std::size_t padded_length, std::size_t part);

/// 3x3 same-padded conv (C_i -> C_i) followed by a 1x1 conv (C_i -> C) per scale.
template <class T>
std::vector<BasicTensor<T>> local_extract(const FeaturePyramid<T>& pyramid, const CfsamWeights<T>& weights,
                                          const CfsamConfig& config);

/// Flattens each H x W x C map row-major and concatenates along length: C x sum(H_i * W_i).
template <class T>
BasicTensor<T> flatten_concat(std::span<const BasicTensor<T>> locals);

/// Inverse of flatten_concat: splits C x Length into H_i x W_i x C maps.
template <class T>
std::vector<BasicTensor<T>> unflatten(const BasicTensor<T>& sequence, const PyramidShape& shapes);

/// Interval-samples C x Length into `part` blocks, first interpolating the
/// length up to padded_length() when it does not divide.
template <class T>
PartitionedSequence<T> partition(const BasicTensor<T>& sequence, std::size_t part);

/// Exact inverse of the interleaving, then interpolates back to the original length if padded.
template <class T>
BasicTensor<T> combine(const PartitionedSequence<T>& partitioned);

/// Pre-norm encoder stack over one N x C block: dense multi-head attention
/// restricted to the block's own tokens, then a ReLU FFN, each with a residual.
template <class T>
BasicTensor<T> transformer_unit(const BasicTensor<T>& block, std::span<const TransformerLayerWeights<T>> layers,
                                const CfsamConfig& config);

/// Sinusoidal embedding for the given token positions, positions.size() x C.
template <class T>
BasicTensor<T> positional_embedding(std::span<const std::size_t> positions, std::size_t channels);

/// partition -> transformer_unit per block -> combine.
template <class T>
BasicTensor<T> global_extract(const BasicTensor<T>& sequence, const CfsamWeights<T>& weights,
                              const CfsamConfig& config);

/// Concatenates L and L' on channels, fuses 2C -> C, splits per scale and
/// projects each map back to its original channel count.
template <class T>
FeaturePyramid<T> fuse_restore(const BasicTensor<T>& local_seq, const BasicTensor<T>& global_seq,
                               const CfsamWeights<T>& weights, const PyramidShape& shapes);

/// Full module. Output pyramid has exactly the input shapes. Shape failures
/// are rethrown as StageError naming the stage.
template <class T>
FeaturePyramid<T> cfsam_forward(const FeaturePyramid<T>& pyramid, const CfsamWeights<T>& weights,
                                const CfsamConfig& config);

}  // namespace cfsam
