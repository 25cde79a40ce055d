// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cfsam/errors.hpp"
#include "cfsam/fixture.hpp"
#include "cfsam/random.hpp"

namespace cfsam {

namespace {

void add_conv(std::vector<WeightSpec>& out, const std::string& prefix, std::size_t k, std::size_t cin,
              std::size_t cout) {
  const std::size_t fan_in = k * k * cin;
  out.push_back({prefix + "kernel", {k, k, cin, cout}, InitKind::fan_in_uniform, fan_in});
  out.push_back({prefix + "bias", {cout}, InitKind::fan_in_uniform, fan_in});
}

void add_linear(std::vector<WeightSpec>& out, const std::string& prefix, std::size_t in, std::size_t outd) {
  out.push_back({prefix + "weight", {in, outd}, InitKind::fan_in_uniform, in});
  out.push_back({prefix + "bias", {outd}, InitKind::fan_in_uniform, in});
}

void add_norm(std::vector<WeightSpec>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + "gamma", {c}, InitKind::ones, c});
  out.push_back({prefix + "beta", {c}, InitKind::zeros, c});
}

template <class T>
CfsamWeights<T> skeleton(const CfsamConfig& config, std::size_t scales) {
  CfsamWeights<T> w;
  w.local.resize(scales);
  w.layers.resize(config.transformer_layers);
  w.restore.resize(scales);
  return w;
}

}  // namespace

std::vector<WeightSpec> weight_layout(const CfsamConfig& config, const std::vector<std::size_t>& channels) {
  config.validate();
  if (channels.empty()) throw ConfigError("weight layout needs at least one pyramid scale");
  const std::size_t c = config.unified_channels;
  const std::size_t hidden = config.ffn_hidden();
  std::vector<WeightSpec> out;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string p = "local." + std::to_string(i) + ".";
    add_conv(out, p + "spatial.", 3, channels[i], channels[i]);
    add_conv(out, p + "reduce.", 1, channels[i], c);
  }
  for (std::size_t l = 0; l < config.transformer_layers; ++l) {
    const std::string p = "transformer." + std::to_string(l) + ".";
    add_norm(out, p + "attn_norm.", c);
    add_linear(out, p + "query.", c, c);
    add_linear(out, p + "key.", c, c);
    add_linear(out, p + "value.", c, c);
    add_linear(out, p + "output.", c, c);
    add_norm(out, p + "ffn_norm.", c);
    add_linear(out, p + "ffn_in.", c, hidden);
    add_linear(out, p + "ffn_out.", hidden, c);
  }
  add_conv(out, "fusion.", 1, 2 * c, c);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    add_conv(out, "restore." + std::to_string(i) + ".", 1, c, channels[i]);
  }
  return out;
}

template <class T>
CfsamWeights<T> init_weights(const CfsamConfig& config, const std::vector<std::size_t>& channels, std::uint64_t seed) {
  Rng rng(seed);
  std::map<std::string, BasicTensor<T>> named;
  for (const WeightSpec& spec : weight_layout(config, channels)) {
    std::vector<T> values(shape_numel(spec.shape));
    switch (spec.init) {
      case InitKind::fan_in_uniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (T& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
        break;
      }
      case InitKind::ones:
        std::fill(values.begin(), values.end(), T(1));
        break;
      case InitKind::zeros:
        break;
    }
    named.emplace(spec.name, BasicTensor<T>::from(spec.shape, std::move(values)));
  }
  return assemble_weights(named, config, channels);
}

template <class T>
void validate_weights(const CfsamWeights<T>& weights, const CfsamConfig& config,
                      const std::vector<std::size_t>& channels) {
  if (weights.local.size() != channels.size() || weights.restore.size() != channels.size()) {
    throw ShapeError("weights cover " + std::to_string(weights.local.size()) + " scales, pyramid has " +
                     std::to_string(channels.size()));
  }
  if (weights.layers.size() != config.transformer_layers) {
    throw ShapeError("weights have " + std::to_string(weights.layers.size()) + " transformer layers, config has " +
                     std::to_string(config.transformer_layers));
  }
  const auto layout = weight_layout(config, channels);
  std::size_t i = 0;
  weights.visit([&](const std::string& name, const BasicTensor<T>& t) {
    const WeightSpec& spec = layout.at(i++);
    if (!t.defined()) throw ShapeError("weight " + name + " is missing");
    if (t.shape() != spec.shape) {
      throw ShapeError("weight " + name + " has shape " + shape_to_string(t.shape()) + ", expected " +
                       shape_to_string(spec.shape));
    }
  });
}

template <class T>
CfsamWeights<T> assemble_weights(const std::map<std::string, BasicTensor<T>>& named, const CfsamConfig& config,
                                 const std::vector<std::size_t>& channels) {
  const auto layout = weight_layout(config, channels);
  if (named.size() != layout.size()) {
    throw ShapeError("bundle has " + std::to_string(named.size()) + " tensors, layout expects " +
                     std::to_string(layout.size()));
  }
  CfsamWeights<T> w = skeleton<T>(config, channels.size());
  w.visit([&](const std::string& name, BasicTensor<T>& t) {
    auto it = named.find(name);
    if (it == named.end()) throw ShapeError("bundle is missing weight " + name);
    t = it->second;
  });
  validate_weights(w, config, channels);
  return w;
}

template <class T>
void save_weight_bundle(const std::filesystem::path& dir, const CfsamWeights<T>& weights) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw FormatError("cannot write " + (dir / "manifest.txt").string());
  manifest << "# cfsam weight bundle\n";
  manifest << "format = cfsam-weights\n";
  manifest << "version = 1\n";
  manifest << "precision = " << precision_name(precision_of<T>()) << "\n";
  weights.visit([&](const std::string& name, const BasicTensor<T>& t) {
    const std::string file = name + ".cfst";
    save_tensor(dir / file, t);
    manifest << "tensor." << name << " = " << file << "\n";
  });
  if (!manifest) throw FormatError("failed writing weight manifest");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

template <class T>
std::map<std::string, BasicTensor<T>> load_weight_tensors(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw FormatError("missing weight manifest in " + dir.string());
  std::map<std::string, BasicTensor<T>> named;
  bool saw_format = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "format") {
      if (value != "cfsam-weights") throw FormatError("manifest format is '" + value + "'");
      saw_format = true;
    } else if (key == "version") {
      if (value != "1") throw FormatError("unsupported manifest version " + value);
    } else if (key == "precision") {
      parse_precision(value);
    } else if (key.rfind("tensor.", 0) == 0) {
      const std::string name = key.substr(7);
      if (!named.emplace(name, load_tensor<T>(dir / value)).second) {
        throw FormatError("manifest names tensor " + name + " twice");
      }
    } else {
      throw FormatError("manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!saw_format) throw FormatError("manifest lacks 'format = cfsam-weights'");
  return named;
}

template <class T>
CfsamWeights<T> load_weight_bundle(const std::filesystem::path& dir, const CfsamConfig& config,
                                   const std::vector<std::size_t>& channels) {
  return assemble_weights(load_weight_tensors<T>(dir), config, channels);
}

#define CFSAM_INSTANTIATE_WEIGHTS(T)                                                                            \
  template CfsamWeights<T> init_weights(const CfsamConfig&, const std::vector<std::size_t>&, std::uint64_t);    \
  template void validate_weights(const CfsamWeights<T>&, const CfsamConfig&, const std::vector<std::size_t>&);  \
  template CfsamWeights<T> assemble_weights(const std::map<std::string, BasicTensor<T>>&, const CfsamConfig&,   \
                                            const std::vector<std::size_t>&);                                   \
  template void save_weight_bundle(const std::filesystem::path&, const CfsamWeights<T>&);                       \
  template std::map<std::string, BasicTensor<T>> load_weight_tensors(const std::filesystem::path&);             \
  template CfsamWeights<T> load_weight_bundle(const std::filesystem::path&, const CfsamConfig&,                 \
                                              const std::vector<std::size_t>&);

CFSAM_INSTANTIATE_WEIGHTS(float)
CFSAM_INSTANTIATE_WEIGHTS(double)

#undef CFSAM_INSTANTIATE_WEIGHTS

}  // namespace cfsam
