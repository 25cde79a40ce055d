// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/cfsam.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cfsam/errors.hpp"
#include "cfsam/ops.hpp"

namespace cfsam {

PyramidShape ssd300_pyramid() {
  return {{38, 38, 512}, {19, 19, 1024}, {10, 10, 512}, {5, 5, 256}, {3, 3, 256}, {1, 1, 256}};
}

void validate_pyramid_shape(const PyramidShape& shape) {
  if (shape.empty()) throw ShapeError("pyramid needs at least one feature map");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const MapShape& m = shape[i];
    if (m.height == 0 || m.width == 0 || m.channels == 0) {
      throw ShapeError("feature map " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && m.area() > shape[i - 1].area()) {
      throw ShapeError("feature maps must be ordered largest area first (map " + std::to_string(i) + ")");
    }
  }
}

std::vector<std::size_t> pyramid_channels(const PyramidShape& shape) {
  std::vector<std::size_t> out;
  out.reserve(shape.size());
  for (const MapShape& m : shape) out.push_back(m.channels);
  return out;
}

std::size_t sequence_length(const PyramidShape& shape) {
  std::size_t n = 0;
  for (const MapShape& m : shape) n += m.area();
  return n;
}

std::string to_string(const MapShape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" + std::to_string(shape.channels);
}

void CfsamConfig::validate() const {
  if (unified_channels == 0) throw ConfigError("unified_channels must be positive");
  if (num_heads == 0) throw ConfigError("num_heads must be positive");
  if (unified_channels % num_heads != 0) {
    throw ConfigError("unified_channels (" + std::to_string(unified_channels) + ") must be divisible by num_heads (" +
                      std::to_string(num_heads) + ")");
  }
  if (part == 0) throw ConfigError("part must be >= 1");
  if (!(ffn_ratio > 0.0) || !std::isfinite(ffn_ratio)) throw ConfigError("ffn_ratio must be positive");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
}

std::size_t CfsamConfig::ffn_hidden() const {
  const auto hidden = static_cast<std::size_t>(std::llround(ffn_ratio * static_cast<double>(unified_channels)));
  return hidden == 0 ? 1 : hidden;
}

template <class T>
PyramidShape FeaturePyramid<T>::shape() const {
  PyramidShape out;
  out.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Shape& s = maps[i].shape();
    if (s.size() != 3) {
      throw ShapeError("feature map " + std::to_string(i) + " must be H x W x C, got " + shape_to_string(s));
    }
    out.push_back({s[0], s[1], s[2]});
  }
  return out;
}

template struct FeaturePyramid<float>;
template struct FeaturePyramid<double>;

std::size_t padded_length(std::size_t length, std::size_t part) {
  if (part == 0) throw ConfigError("part must be >= 1");
  return (length + part - 1) / part * part;
}

std::vector<std::size_t> interval_indices(std::size_t padded, std::size_t part) {
  if (part == 0 || padded % part != 0) throw ShapeError("padded length must be a multiple of part");
  const std::size_t n = padded / part;
  std::vector<std::size_t> idx;
  idx.reserve(padded);
  for (std::size_t p = 0; p < part; ++p)
    for (std::size_t j = 0; j < n; ++j) idx.push_back(p + j * part);
  return idx;
}

template <class T>
std::vector<BasicTensor<T>> local_extract(const FeaturePyramid<T>& pyramid, const CfsamWeights<T>& weights,
                                          const CfsamConfig& config) {
  const PyramidShape shapes = pyramid.shape();
  if (weights.local.size() != shapes.size()) {
    throw ShapeError("weights have " + std::to_string(weights.local.size()) + " local branches, pyramid has " +
                     std::to_string(shapes.size()) + " maps");
  }
  std::vector<BasicTensor<T>> out;
  out.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const LocalWeights<T>& w = weights.local[i];
    const Shape& ks = w.spatial.kernel.shape();
    if (ks.size() != 4 || ks[2] != shapes[i].channels) {
      throw ShapeError("scale " + std::to_string(i) + ": local weights expect " +
                       (ks.size() == 4 ? std::to_string(ks[2]) : std::string("?")) + " channels, map has " +
                       std::to_string(shapes[i].channels));
    }
    auto spatial = conv2d(pyramid.maps[i], w.spatial.kernel, w.spatial.bias, ks[0] / 2, 1);
    if (spatial.dim(0) != shapes[i].height || spatial.dim(1) != shapes[i].width) {
      throw ShapeError("scale " + std::to_string(i) + ": spatial conv must preserve H x W");
    }
    auto reduced = conv2d(spatial, w.reduce.kernel, w.reduce.bias, 0, 1);
    if (reduced.dim(2) != config.unified_channels) {
      throw ShapeError("scale " + std::to_string(i) + ": reduce conv yields " + std::to_string(reduced.dim(2)) +
                       " channels, expected " + std::to_string(config.unified_channels));
    }
    out.push_back(std::move(reduced));
  }
  return out;
}

template <class T>
BasicTensor<T> flatten_concat(std::span<const BasicTensor<T>> locals) {
  if (locals.empty()) throw ShapeError("flatten_concat needs at least one map");
  const std::size_t c = locals.front().dim(2);
  std::vector<BasicTensor<T>> columns;
  columns.reserve(locals.size());
  for (std::size_t i = 0; i < locals.size(); ++i) {
    const BasicTensor<T>& m = locals[i];
    if (m.rank() != 3) throw ShapeError("flatten_concat: map " + std::to_string(i) + " is not H x W x C");
    if (m.dim(2) != c) {
      throw ShapeError("flatten_concat: map " + std::to_string(i) + " has " + std::to_string(m.dim(2)) +
                       " channels, expected " + std::to_string(c));
    }
    columns.push_back(transpose2d(reshape(m, {m.dim(0) * m.dim(1), c})));
  }
  return columns.size() == 1 ? columns.front() : concat(columns, 1);
}

template <class T>
std::vector<BasicTensor<T>> unflatten(const BasicTensor<T>& sequence, const PyramidShape& shapes) {
  if (sequence.rank() != 2) throw ShapeError("unflatten: sequence must be C x Length");
  if (sequence_length(shapes) != sequence.dim(1)) {
    throw ShapeError("pyramid shapes cover " + std::to_string(sequence_length(shapes)) +
                     " tokens but the sequence has " + std::to_string(sequence.dim(1)));
  }
  const std::size_t c = sequence.dim(0);
  const auto tokens = transpose2d(sequence);
  std::vector<BasicTensor<T>> out;
  std::size_t offset = 0;
  for (const MapShape& m : shapes) {
    out.push_back(reshape(slice(tokens, 0, offset, m.area()), {m.height, m.width, c}));
    offset += m.area();
  }
  return out;
}

template <class T>
PartitionedSequence<T> partition(const BasicTensor<T>& sequence, std::size_t part) {
  if (part == 0) throw ConfigError("part must be >= 1");
  if (sequence.rank() != 2) throw ShapeError("partition: sequence must be C x Length");
  const std::size_t c = sequence.dim(0);
  const std::size_t length = sequence.dim(1);
  const std::size_t padded = padded_length(length, part);
  const BasicTensor<T> stretched = padded == length ? sequence : interp_linear_1d(sequence, padded);
  const auto order = interval_indices(padded, part);
  auto gathered = index_select(transpose2d(stretched), 0, std::span<const std::size_t>(order));
  return {reshape(gathered, {part, padded / part, c}), length, padded, part};
}

template <class T>
BasicTensor<T> combine(const PartitionedSequence<T>& ps) {
  const Shape& s = ps.blocks.shape();
  if (ps.part == 0 || ps.padded_length % ps.part != 0 || ps.padded_length < ps.original_length ||
      ps.padded_length != padded_length(ps.original_length, ps.part)) {
    throw ShapeError("combine: inconsistent partition metadata (length " + std::to_string(ps.original_length) +
                     ", padded " + std::to_string(ps.padded_length) + ", part " + std::to_string(ps.part) + ")");
  }
  if (s.size() != 3 || s[0] != ps.part || s[1] != ps.block_length()) {
    throw ShapeError("combine: blocks " + shape_to_string(s) + " do not match metadata");
  }
  const std::size_t c = s[2];
  const auto order = interval_indices(ps.padded_length, ps.part);
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t row = 0; row < order.size(); ++row) inverse[order[row]] = row;
  auto rows = reshape(ps.blocks, {ps.padded_length, c});
  auto restored = transpose2d(index_select(rows, 0, std::span<const std::size_t>(inverse)));
  if (ps.padded_length == ps.original_length) return restored;
  return interp_linear_1d(restored, ps.original_length);
}

namespace {

template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearWeights<T>& w) {
  return add_bias(matmul(x, w.weight), w.bias);
}

template <class T>
BasicTensor<T> encoder_layer(const BasicTensor<T>& x, const TransformerLayerWeights<T>& w, const CfsamConfig& config) {
  const std::size_t heads = config.num_heads;
  const std::size_t d = config.head_dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  const auto h = layer_norm(x, w.attn_norm.gamma, w.attn_norm.beta, config.layer_norm_eps);
  const auto q = linear(h, w.query);
  const auto k = linear(h, w.key);
  const auto v = linear(h, w.value);
  std::vector<BasicTensor<T>> head_out;
  head_out.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const auto qh = heads == 1 ? q : slice(q, 1, i * d, d);
    const auto kh = heads == 1 ? k : slice(k, 1, i * d, d);
    const auto vh = heads == 1 ? v : slice(v, 1, i * d, d);
    const auto weights = softmax(scale(matmul(qh, transpose2d(kh)), inv_sqrt_d));
    head_out.push_back(matmul(weights, vh));
  }
  const auto attended = heads == 1 ? head_out.front() : concat(head_out, 1);
  const auto x1 = add(x, linear(attended, w.output));

  const auto h2 = layer_norm(x1, w.ffn_norm.gamma, w.ffn_norm.beta, config.layer_norm_eps);
  const auto ffn = linear(relu(linear(h2, w.ffn_in)), w.ffn_out);
  return add(x1, ffn);
}

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw StageError(stage, e.what());
  } catch (const ConfigError& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

template <class T>
BasicTensor<T> transformer_unit(const BasicTensor<T>& block, std::span<const TransformerLayerWeights<T>> layers,
                                const CfsamConfig& config) {
  config.validate();
  if (block.rank() != 2 || block.dim(1) != config.unified_channels) {
    throw ShapeError("transformer_unit: block must be N x " + std::to_string(config.unified_channels) + ", got " +
                     shape_to_string(block.shape()));
  }
  BasicTensor<T> x = block;
  for (const auto& layer : layers) x = encoder_layer(x, layer, config);
  return x;
}

template <class T>
BasicTensor<T> positional_embedding(std::span<const std::size_t> positions, std::size_t channels) {
  std::vector<T> values(positions.size() * channels);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const double pos = static_cast<double>(positions[r]);
    for (std::size_t i = 0; i < channels; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(channels));
      values[r * channels + i] = static_cast<T>(i % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq));
    }
  }
  return BasicTensor<T>::from({positions.size(), channels}, std::move(values));
}

template <class T>
BasicTensor<T> global_extract(const BasicTensor<T>& sequence, const CfsamWeights<T>& weights,
                              const CfsamConfig& config) {
  if (weights.layers.size() != config.transformer_layers) {
    throw ShapeError("weights have " + std::to_string(weights.layers.size()) + " transformer layers, config has " +
                     std::to_string(config.transformer_layers));
  }
  PartitionedSequence<T> ps = partition(sequence, config.part);
  const std::size_t n = ps.block_length();
  const std::size_t c = sequence.dim(0);
  const auto order = interval_indices(ps.padded_length, ps.part);
  std::vector<BasicTensor<T>> outputs;
  outputs.reserve(ps.part);
  for (std::size_t p = 0; p < ps.part; ++p) {
    auto block = ps.part == 1 ? reshape(ps.blocks, {n, c}) : reshape(slice(ps.blocks, 0, p, 1), {n, c});
    if (config.use_positional_embedding) {
      block = add(block, positional_embedding<T>(std::span<const std::size_t>(order).subspan(p * n, n), c));
    }
    outputs.push_back(reshape(transformer_unit(block, std::span<const TransformerLayerWeights<T>>(weights.layers),
                                               config),
                              {1, n, c}));
  }
  ps.blocks = outputs.size() == 1 ? outputs.front() : concat(outputs, 0);
  return combine(ps);
}

template <class T>
FeaturePyramid<T> fuse_restore(const BasicTensor<T>& local_seq, const BasicTensor<T>& global_seq,
                               const CfsamWeights<T>& weights, const PyramidShape& shapes) {
  if (local_seq.shape() != global_seq.shape()) {
    throw ShapeError("L and L' differ: " + shape_to_string(local_seq.shape()) + " vs " +
                     shape_to_string(global_seq.shape()));
  }
  const std::size_t c = local_seq.dim(0);
  const std::size_t length = local_seq.dim(1);
  if (sequence_length(shapes) != length) {
    throw ShapeError("pyramid shapes cover " + std::to_string(sequence_length(shapes)) +
                     " tokens but the sequence has " + std::to_string(length));
  }
  if (weights.restore.size() != shapes.size()) {
    throw ShapeError("weights have " + std::to_string(weights.restore.size()) + " restore projections, pyramid has " +
                     std::to_string(shapes.size()) + " maps");
  }
  const auto stacked = concat(std::vector<BasicTensor<T>>{local_seq, global_seq}, 0);  // 2C x Length
  const auto as_map = reshape(transpose2d(stacked), {1, length, 2 * c});
  const auto fused = conv2d(as_map, weights.fusion.kernel, weights.fusion.bias, 0, 1);
  const std::size_t fused_c = fused.dim(2);
  const auto tokens = reshape(fused, {length, fused_c});

  FeaturePyramid<T> out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const MapShape& m = shapes[i];
    auto span_map = reshape(slice(tokens, 0, offset, m.area()), {m.height, m.width, fused_c});
    auto restored = conv2d(span_map, weights.restore[i].kernel, weights.restore[i].bias, 0, 1);
    if (restored.shape() != m.as_shape()) {
      throw ShapeError("restored map " + std::to_string(i) + " has shape " + shape_to_string(restored.shape()) +
                       ", expected " + shape_to_string(m.as_shape()));
    }
    out.maps.push_back(std::move(restored));
    offset += m.area();
  }
  return out;
}

template <class T>
FeaturePyramid<T> cfsam_forward(const FeaturePyramid<T>& pyramid, const CfsamWeights<T>& weights,
                                const CfsamConfig& config) {
  const PyramidShape shapes = run_stage("input", [&] {
    config.validate();
    auto s = pyramid.shape();
    validate_pyramid_shape(s);
    return s;
  });
  const auto locals = run_stage("local_extract", [&] { return local_extract(pyramid, weights, config); });
  const auto seq = run_stage("flatten_concat",
                             [&] { return flatten_concat(std::span<const BasicTensor<T>>(locals)); });
  const auto global = run_stage("global_extract", [&] { return global_extract(seq, weights, config); });
  auto out = run_stage("fuse_restore", [&] { return fuse_restore(seq, global, weights, shapes); });
  if (config.residual_input) {
    for (std::size_t i = 0; i < out.maps.size(); ++i) out.maps[i] = add(out.maps[i], pyramid.maps[i]);
  }
  return out;
}

#define CFSAM_INSTANTIATE_PIPELINE(T)                                                                             \
  template std::vector<BasicTensor<T>> local_extract(const FeaturePyramid<T>&, const CfsamWeights<T>&,            \
                                                     const CfsamConfig&);                                         \
  template BasicTensor<T> flatten_concat(std::span<const BasicTensor<T>>);                                        \
  template std::vector<BasicTensor<T>> unflatten(const BasicTensor<T>&, const PyramidShape&);                     \
  template PartitionedSequence<T> partition(const BasicTensor<T>&, std::size_t);                                  \
  template BasicTensor<T> combine(const PartitionedSequence<T>&);                                                 \
  template BasicTensor<T> transformer_unit(const BasicTensor<T>&, std::span<const TransformerLayerWeights<T>>,    \
                                           const CfsamConfig&);                                                   \
  template BasicTensor<T> positional_embedding(std::span<const std::size_t>, std::size_t);                        \
  template BasicTensor<T> global_extract(const BasicTensor<T>&, const CfsamWeights<T>&, const CfsamConfig&);      \
  template FeaturePyramid<T> fuse_restore(const BasicTensor<T>&, const BasicTensor<T>&, const CfsamWeights<T>&,   \
                                          const PyramidShape&);                                                   \
  template FeaturePyramid<T> cfsam_forward(const FeaturePyramid<T>&, const CfsamWeights<T>&, const CfsamConfig&);

CFSAM_INSTANTIATE_PIPELINE(float)
CFSAM_INSTANTIATE_PIPELINE(double)

#undef CFSAM_INSTANTIATE_PIPELINE

}  // namespace cfsam
