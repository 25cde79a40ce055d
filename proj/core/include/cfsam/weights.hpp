// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cfsam/config.hpp"
#include "cfsam/tensor.hpp"

namespace cfsam {

template <class T>
struct ConvWeights {
  BasicTensor<T> kernel;  // k x k x Cin x Cout
  BasicTensor<T> bias;    // Cout
};

template <class T>
struct LinearWeights {
  BasicTensor<T> weight;  // in x out, applied as x * W + b
  BasicTensor<T> bias;    // out
};

template <class T>
struct NormWeights {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <class T>
struct TransformerLayerWeights {
  NormWeights<T> attn_norm;
  LinearWeights<T> query;
  LinearWeights<T> key;
  LinearWeights<T> value;
  LinearWeights<T> output;
  NormWeights<T> ffn_norm;
  LinearWeights<T> ffn_in;
  LinearWeights<T> ffn_out;
};

template <class T>
struct LocalWeights {
  ConvWeights<T> spatial;  // 3x3, C_i -> C_i
  ConvWeights<T> reduce;   // 1x1, C_i -> C
};

/// All trainable parameters of the module for one pyramid channel list.
template <class T>
struct CfsamWeights {
  std::vector<LocalWeights<T>> local;
  std::vector<TransformerLayerWeights<T>> layers;
  ConvWeights<T> fusion;               // 1x1, 2C -> C
  std::vector<ConvWeights<T>> restore;  // 1x1, C -> C_i

  /// Calls fn(name, tensor) for every parameter in canonical order.
  template <class Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }
  template <class Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const BasicTensor<T>& t) { n += t.numel(); });
    return n;
  }

  template <class U>
  CfsamWeights<U> cast() const {
    CfsamWeights<U> out;
    out.local.resize(local.size());
    out.layers.resize(layers.size());
    out.restore.resize(restore.size());
    auto src = named_tensors();
    out.visit([&](const std::string& name, BasicTensor<U>& t) { t = src.at(name).template cast<U>(); });
    return out;
  }

  std::map<std::string, BasicTensor<T>> named_tensors() const {
    std::map<std::string, BasicTensor<T>> out;
    visit([&](const std::string& name, const BasicTensor<T>& t) { out.emplace(name, t); });
    return out;
  }

 private:
  template <class Self, class Fn>
  static void visit_impl(Self& self, Fn& fn) {
    for (std::size_t i = 0; i < self.local.size(); ++i) {
      const std::string p = "local." + std::to_string(i) + ".";
      fn(p + "spatial.kernel", self.local[i].spatial.kernel);
      fn(p + "spatial.bias", self.local[i].spatial.bias);
      fn(p + "reduce.kernel", self.local[i].reduce.kernel);
      fn(p + "reduce.bias", self.local[i].reduce.bias);
    }
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string p = "transformer." + std::to_string(l) + ".";
      auto& layer = self.layers[l];
      fn(p + "attn_norm.gamma", layer.attn_norm.gamma);
      fn(p + "attn_norm.beta", layer.attn_norm.beta);
      fn(p + "query.weight", layer.query.weight);
      fn(p + "query.bias", layer.query.bias);
      fn(p + "key.weight", layer.key.weight);
      fn(p + "key.bias", layer.key.bias);
      fn(p + "value.weight", layer.value.weight);
      fn(p + "value.bias", layer.value.bias);
      fn(p + "output.weight", layer.output.weight);
      fn(p + "output.bias", layer.output.bias);
      fn(p + "ffn_norm.gamma", layer.ffn_norm.gamma);
      fn(p + "ffn_norm.beta", layer.ffn_norm.beta);
      fn(p + "ffn_in.weight", layer.ffn_in.weight);
      fn(p + "ffn_in.bias", layer.ffn_in.bias);
      fn(p + "ffn_out.weight", layer.ffn_out.weight);
      fn(p + "ffn_out.bias", layer.ffn_out.bias);
    }
    fn(std::string("fusion.kernel"), self.fusion.kernel);
    fn(std::string("fusion.bias"), self.fusion.bias);
    for (std::size_t i = 0; i < self.restore.size(); ++i) {
      const std::string p = "restore." + std::to_string(i) + ".";
      fn(p + "kernel", self.restore[i].kernel);
      fn(p + "bias", self.restore[i].bias);
    }
  }
};

enum class InitKind { fan_in_uniform, ones, zeros };

struct WeightSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::fan_in_uniform;
  std::size_t fan_in = 1;
};

/// Canonical parameter layout (same order as CfsamWeights::visit).
std::vector<WeightSpec> weight_layout(const CfsamConfig& config, const std::vector<std::size_t>& channels);

/// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm gains 1, norm shifts 0.
template <class T>
CfsamWeights<T> init_weights(const CfsamConfig& config, const std::vector<std::size_t>& channels, std::uint64_t seed);

/// Throws ShapeError naming the first tensor whose shape differs from weight_layout().
template <class T>
void validate_weights(const CfsamWeights<T>& weights, const CfsamConfig& config,
                      const std::vector<std::size_t>& channels);

/// Builds the structured bundle from name -> tensor; every layout name must be present exactly.
template <class T>
CfsamWeights<T> assemble_weights(const std::map<std::string, BasicTensor<T>>& named, const CfsamConfig& config,
                                 const std::vector<std::size_t>& channels);

// Weight bundle on disk: `manifest.txt` (key = value lines) plus one CFST
// blob per tensor, referenced as `tensor.<name> = <file>`.
template <class T>
void save_weight_bundle(const std::filesystem::path& dir, const CfsamWeights<T>& weights);

template <class T>
std::map<std::string, BasicTensor<T>> load_weight_tensors(const std::filesystem::path& dir);

template <class T>
CfsamWeights<T> load_weight_bundle(const std::filesystem::path& dir, const CfsamConfig& config,
                                   const std::vector<std::size_t>& channels);

}  // namespace cfsam
