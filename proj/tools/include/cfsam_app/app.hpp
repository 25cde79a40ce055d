// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cfsam_app/run_config.hpp"

namespace cfsam::app {

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kUsageError = 2 };

// Each command writes report.json (plus command-specific files) into
// config.out and returns an ExitCode. Human-readable output goes to `out`.
int cmd_shapes(const RunConfig& config, const Json& echo, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, const Json& echo, std::ostream& out);
int cmd_flops(const RunConfig& config, const Json& echo, std::ostream& out);
int cmd_toytrain(const RunConfig& config, const Json& echo, std::ostream& out);
int cmd_parity(const RunConfig& config, const Json& echo, std::ostream& out);

/// Full command line: `cfsam <subcommand> [--config p] [--set k=v]... [--out d]
/// [--precision f32|f64] [--seed n]`. Never throws; errors map to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfsam::app
