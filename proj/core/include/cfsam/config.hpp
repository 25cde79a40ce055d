// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cfsam/tensor.hpp"

namespace cfsam {

struct MapShape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t area() const { return height * width; }
  Shape as_shape() const { return {height, width, channels}; }
  friend bool operator==(const MapShape&, const MapShape&) = default;
};

/// Ordered largest-area first, one entry per predicted feature map.
using PyramidShape = std::vector<MapShape>;

/// The six SSD300 prediction maps: 38x38x512 down to 1x1x256.
PyramidShape ssd300_pyramid();

/// Throws ShapeError unless n >= 1, every dim is positive and areas are non-increasing.
void validate_pyramid_shape(const PyramidShape& shape);

std::vector<std::size_t> pyramid_channels(const PyramidShape& shape);
std::size_t sequence_length(const PyramidShape& shape);
std::string to_string(const MapShape& shape);

struct CfsamConfig {
  std::size_t unified_channels = 256;
  std::size_t part = 2;
  std::size_t num_heads = 4;
  std::size_t transformer_layers = 1;
  double ffn_ratio = 2.0;
  bool use_positional_embedding = false;
  // Adds F_i to the restored map R_i.
  bool residual_input = false;
  double layer_norm_eps = 1e-5;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  std::size_t head_dim() const { return unified_channels / num_heads; }
  /// FFN width, round(ffn_ratio * C).
  std::size_t ffn_hidden() const;
};

template <class T>
struct FeaturePyramid {
  std::vector<BasicTensor<T>> maps;

  std::size_t size() const { return maps.size(); }
  PyramidShape shape() const;
};

extern template struct FeaturePyramid<float>;
extern template struct FeaturePyramid<double>;

}  // namespace cfsam
