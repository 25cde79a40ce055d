// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cfsam/config.hpp"
#include "cfsam/tensor.hpp"
#include "cfsam/weights.hpp"

namespace cfsam {

struct GradCheckGroup {
  std::string name;
  std::size_t elements = 0;
  // max over elements of |analytic - central difference| / max(1, |analytic|)
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
  /// Names of groups at or above tolerance.
  std::vector<std::string> failing(double tolerance) const;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares tape gradients of `loss(params)` with central differences of step `h`.
GradCheckReport gradcheck(const NamedTensors& params, const LossFn& loss, double h = 1e-5);

/// End-to-end check of every weight group with loss = sum of all output maps.
GradCheckReport gradcheck_cfsam(const FeaturePyramid<double>& pyramid, const CfsamWeights<double>& weights,
                                const CfsamConfig& config, double h = 1e-5);

}  // namespace cfsam
