// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cfsam/cfsam.hpp"
#include "cfsam/ops.hpp"

namespace cfsam {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
  return worst;
}

std::vector<std::string> GradCheckReport::failing(double tolerance) const {
  std::vector<std::string> out;
  for (const auto& g : groups)
    if (!(g.max_rel_error < tolerance)) out.push_back(g.name);
  return out;
}

GradCheckReport gradcheck(const NamedTensors& params, const LossFn& loss, double h) {
  std::vector<Tensor> values;
  values.reserve(params.size());
  for (const auto& [name, t] : params) values.push_back(t.detach());

  GradTape<double> tape;
  std::vector<Tensor> leaves;
  leaves.reserve(values.size());
  for (const auto& v : values) leaves.push_back(tape.watch(v));
  const Tensor l = loss(leaves);
  tape.backward(l);

  GradCheckReport report;
  for (std::size_t p = 0; p < values.size(); ++p) {
    const Tensor analytic = leaves[p].grad_tensor();
    GradCheckGroup group{params[p].first, values[p].numel(), 0.0};
    const auto base = values[p].data();
    for (std::size_t j = 0; j < base.size(); ++j) {
      auto evaluate = [&](double delta) {
        std::vector<double> bumped(base.begin(), base.end());
        bumped[j] += delta;
        std::vector<Tensor> args = values;
        args[p] = Tensor::from(values[p].shape(), std::move(bumped));
        return loss(args).item();
      };
      const double numeric = (evaluate(h) - evaluate(-h)) / (2.0 * h);
      const double a = analytic.data()[j];
      group.max_rel_error = std::max(group.max_rel_error, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

GradCheckReport gradcheck_cfsam(const FeaturePyramid<double>& pyramid, const CfsamWeights<double>& weights,
                                const CfsamConfig& config, double h) {
  NamedTensors params;
  weights.visit([&](const std::string& name, const Tensor& t) { params.emplace_back(name, t); });
  CfsamWeights<double> scratch = weights;
  auto loss = [&](const std::vector<Tensor>& args) {
    std::size_t i = 0;
    scratch.visit([&](const std::string&, Tensor& t) { t = args[i++]; });
    const auto out = cfsam_forward(pyramid, scratch, config);
    std::vector<Tensor> sums;
    for (const auto& m : out.maps) sums.push_back(reshape(sum(m), {1}));
    return sum(concat(sums, 0));
  };
  return gradcheck(params, loss, h);
}

}  // namespace cfsam
