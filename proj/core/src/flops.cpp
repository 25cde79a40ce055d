// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/flops.hpp"

#include <sstream>
#include <stdexcept>

#include "cfsam/cfsam.hpp"
#include "cfsam/errors.hpp"

namespace cfsam {

std::uint64_t count_conv(std::uint64_t height, std::uint64_t width, std::uint64_t k, std::uint64_t cin,
                         std::uint64_t cout) {
  return height * width * k * k * cin * cout;
}

AttentionCost count_attention(std::uint64_t tokens, std::uint64_t channels, std::uint64_t heads,
                              std::uint64_t part) {
  if (tokens == 0 || part == 0 || heads == 0) throw ConfigError("count_attention: arguments must be positive");
  const std::uint64_t padded = padded_length(tokens, part);
  const std::uint64_t block = padded / part;
  AttentionCost cost;
  cost.projections = 4 * padded * channels * channels;
  cost.quadratic = part * 2 * block * block * channels;
  return cost;
}

const StageCost& FlopReport::stage(std::string_view name) const {
  for (const StageCost& s : stages)
    if (s.stage == name) return s;
  throw std::out_of_range("no stage named " + std::string(name));
}

std::string FlopReport::to_csv() const {
  std::ostringstream os;
  os << "stage,macs,flops,params\n";
  for (const StageCost& s : stages) {
    os << s.stage << (s.informational ? " (informational)" : "") << ',' << s.macs << ',' << s.flops() << ','
       << s.params << '\n';
  }
  os << "total," << total_macs << ',' << total_flops() << ',' << total_params << '\n';
  return os.str();
}

FlopReport count_cfsam(const CfsamConfig& config, const PyramidShape& shapes) {
  config.validate();
  validate_pyramid_shape(shapes);
  const std::uint64_t c = config.unified_channels;
  const std::uint64_t hidden = config.ffn_hidden();
  const std::uint64_t layers = config.transformer_layers;

  FlopReport r;
  r.config = config;
  r.shapes = shapes;
  r.sequence_length = sequence_length(shapes);
  r.padded_length = padded_length(r.sequence_length, config.part);
  const std::uint64_t length = r.sequence_length;
  const std::uint64_t padded = r.padded_length;

  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const MapShape& m = shapes[i];
    const std::uint64_t ci = m.channels;
    const std::string p = "local." + std::to_string(i);
    r.stages.push_back({p + ".spatial", count_conv(m.height, m.width, 3, ci, ci), 9 * ci * ci + ci});
    r.stages.push_back({p + ".reduce", count_conv(m.height, m.width, 1, ci, c), ci * c + c});
  }

  const AttentionCost attn = count_attention(length, c, config.num_heads, config.part);
  r.stages.push_back({"attention.projections", layers * attn.projections, layers * 4 * (c * c + c)});
  r.stages.push_back({"attention.scores", layers * attn.quadratic, 0});
  r.stages.push_back({"ffn", layers * 2 * padded * c * hidden, layers * (c * hidden + hidden + hidden * c + c)});
  r.stages.push_back({"layer_norm", 0, layers * 4 * c});

  const std::uint64_t block = padded / config.part;
  // exp per attention score, plus mean/variance passes of both norms
  const std::uint64_t softmax_ops = layers * config.num_heads * config.part * block * block;
  const std::uint64_t norm_ops = layers * 2 * 2 * padded * c;
  r.stages.push_back({"softmax_norm", softmax_ops + norm_ops, 0, true});

  r.stages.push_back({"fusion", count_conv(1, length, 1, 2 * c, c), 2 * c * c + c});
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const MapShape& m = shapes[i];
    r.stages.push_back({"restore." + std::to_string(i), count_conv(m.height, m.width, 1, c, m.channels),
                        c * m.channels + m.channels});
  }

  for (const StageCost& s : r.stages) {
    if (s.informational) continue;
    r.total_macs += s.macs;
    r.total_params += s.params;
  }
  return r;
}

}  // namespace cfsam
