// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <fstream>
#include <ostream>

#include "cfsam/errors.hpp"
#include "cfsam_app/app.hpp"

namespace cfsam::app {

namespace {

constexpr const char* kCommands[] = {"shapes", "gradcheck", "flops", "toy-train", "parity"};

int dispatch(const std::string& command, const RunConfig& config, const Json& echo, std::ostream& out) {
  if (command == "shapes") return cmd_shapes(config, echo, out);
  if (command == "gradcheck") return cmd_gradcheck(config, echo, out);
  if (command == "flops") return cmd_flops(config, echo, out);
  if (command == "toy-train") return cmd_toytrain(config, echo, out);
  return cmd_parity(config, echo, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-layer feature self-attention checks and reports", "cfsam"};
  std::string command, config_path, out_dir, precision;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  app.add_option("command", command, "shapes | gradcheck | flops | toy-train | parity")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--set", overrides, "dotted key=value override (repeatable)")->take_all();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--precision", precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--seed", seed, "base seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "cfsam: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  RunConfig config;
  Json doc;
  try {
    doc = default_config_json();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config file " + config_path);
      const Json file_doc = Json::parse(f, nullptr, false);
      if (file_doc.is_discarded()) throw ConfigError("config file " + config_path + " is not valid JSON");
      merge_strict(doc, file_doc);
    }
    for (const auto& o : overrides) apply_override(doc, o);
    if (!out_dir.empty()) doc["out"] = out_dir;
    if (!precision.empty()) doc["cfsam"]["precision"] = precision;
    if (seed) doc["seed"] = *seed;
    config = run_config_from_json(doc);
  } catch (const std::exception& e) {
    err << "cfsam: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    return dispatch(command, config, doc, out);
  } catch (const ConfigError& e) {
    err << "cfsam " << command << ": " << e.what() << "\n";
    return kUsageError;
  } catch (const FormatError& e) {
    err << "cfsam " << command << ": " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "cfsam " << command << ": " << e.what() << "\n";
    return kCheckFailed;
  }
}

}  // namespace cfsam::app
