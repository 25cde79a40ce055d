// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfsam/config.hpp"
#include "cfsam/harness.hpp"

namespace cfsam::app {

using Json = nlohmann::ordered_json;

struct TaskOptions {
  TaskSpec spec;          // spec.seed is replaced per run
  CfsamConfig model;      // CFSAM arm
  std::size_t steps = 300;
  double lr = 0.05;
  std::size_t runs = 5;   // run r uses seed + r
  bool record_seconds = true;
};

struct GradCheckOptions {
  std::string mode = "full";  // full | matmul
  PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  CfsamConfig model;
  double h = 1e-5;
  double tolerance = 1e-4;
  // Test hook: scales the upstream gradient of the named op during backward.
  std::string fault_op;
};

struct ParityOptions {
  std::string fixture_dir;
  std::optional<double> tolerance;  // default depends on precision
  bool generate = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "cfsam_out";
  PyramidShape shapes;
  CfsamConfig cfsam;
  TaskOptions task;
  GradCheckOptions gradcheck;
  ParityOptions parity;
  bool corrupt_restore = false;  // debug.corrupt_restore
};

/// Default document: six-scale SSD300 pyramid, part 2, C = 256.
Json default_config_json();

/// Strictly merges `patch` into `base`: every key in `patch` must already exist
/// in `base` (objects recurse). Throws ConfigError naming the first unknown key.
void merge_strict(Json& base, const Json& patch, const std::string& prefix = "");

/// Applies a dotted `key=value` override. The value is parsed as JSON when
/// possible and taken as a plain string otherwise.
void apply_override(Json& doc, std::string_view assignment);

/// Converts a fully merged document. Throws ConfigError on type or range errors.
RunConfig run_config_from_json(const Json& doc);

/// Canonical document for a RunConfig (round-trips through run_config_from_json).
Json run_config_to_json(const RunConfig& config);

Json shapes_to_json(const PyramidShape& shapes);
PyramidShape shapes_from_json(const Json& j, std::string_view key);

}  // namespace cfsam::app
