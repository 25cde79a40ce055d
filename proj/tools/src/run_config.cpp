// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam_app/run_config.hpp"

#include "cfsam/errors.hpp"

namespace cfsam::app {

namespace {

CfsamConfig toy_model_defaults() {
  CfsamConfig c;
  c.unified_channels = 8;
  c.num_heads = 2;
  c.part = 2;
  return c;
}

CfsamConfig gradcheck_model_defaults() {
  CfsamConfig c;
  c.unified_channels = 4;
  c.num_heads = 1;
  c.part = 2;
  return c;
}

Json model_to_json(const CfsamConfig& c, bool with_precision) {
  Json j;
  j["unified_channels"] = c.unified_channels;
  j["part"] = c.part;
  j["num_heads"] = c.num_heads;
  j["transformer_layers"] = c.transformer_layers;
  j["ffn_ratio"] = c.ffn_ratio;
  j["use_positional_embedding"] = c.use_positional_embedding;
  j["residual_input"] = c.residual_input;
  j["layer_norm_eps"] = c.layer_norm_eps;
  if (with_precision) j["precision"] = std::string(precision_name(c.precision));
  return j;
}

CfsamConfig model_from_json(const Json& j, std::uint64_t seed) {
  CfsamConfig c;
  c.unified_channels = j.at("unified_channels").get<std::size_t>();
  c.part = j.at("part").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.transformer_layers = j.at("transformer_layers").get<std::size_t>();
  c.ffn_ratio = j.at("ffn_ratio").get<double>();
  c.use_positional_embedding = j.at("use_positional_embedding").get<bool>();
  c.residual_input = j.at("residual_input").get<bool>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  c.seed = seed;
  c.validate();
  return c;
}

std::string target_name(TargetMode t) { return t == TargetMode::cross_scale ? "cross_scale" : "own_scale"; }

TargetMode parse_target(const std::string& s) {
  if (s == "cross_scale") return TargetMode::cross_scale;
  if (s == "own_scale") return TargetMode::own_scale;
  throw ConfigError("task.target must be cross_scale or own_scale, got '" + s + "'");
}

}  // namespace

Json shapes_to_json(const PyramidShape& shapes) {
  Json arr = Json::array();
  for (const MapShape& m : shapes) arr.push_back({m.height, m.width, m.channels});
  return arr;
}

PyramidShape shapes_from_json(const Json& j, std::string_view key) {
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be a list of [H, W, C] triples");
  PyramidShape out;
  for (const Json& e : j) {
    if (!e.is_array() || e.size() != 3) throw ConfigError(std::string(key) + " entries must be [H, W, C]");
    out.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<std::size_t>()});
  }
  try {
    validate_pyramid_shape(out);
  } catch (const ShapeError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  return out;
}

Json run_config_to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["pyramid"]["shapes"] = shapes_to_json(c.shapes);
  j["cfsam"] = model_to_json(c.cfsam, true);

  Json& t = j["task"];
  t["shapes"] = shapes_to_json(c.task.spec.shapes);
  t["samples"] = c.task.spec.samples;
  t["noise"] = c.task.spec.noise;
  t["label_bound"] = c.task.spec.label_bound;
  t["target"] = target_name(c.task.spec.target);
  t["steps"] = c.task.steps;
  t["lr"] = c.task.lr;
  t["runs"] = c.task.runs;
  t["record_seconds"] = c.task.record_seconds;
  t["model"] = model_to_json(c.task.model, false);

  Json& g = j["gradcheck"];
  g["mode"] = c.gradcheck.mode;
  g["shapes"] = shapes_to_json(c.gradcheck.shapes);
  g["h"] = c.gradcheck.h;
  g["tolerance"] = c.gradcheck.tolerance;
  g["fault_op"] = c.gradcheck.fault_op;
  g["model"] = model_to_json(c.gradcheck.model, false);

  Json& p = j["parity"];
  p["fixture_dir"] = c.parity.fixture_dir;
  p["tolerance"] = c.parity.tolerance ? Json(*c.parity.tolerance) : Json(nullptr);
  p["generate"] = c.parity.generate;

  j["debug"]["corrupt_restore"] = c.corrupt_restore;
  return j;
}

Json default_config_json() {
  RunConfig c;
  c.shapes = ssd300_pyramid();
  c.task.model = toy_model_defaults();
  c.gradcheck.model = gradcheck_model_defaults();
  return run_config_to_json(c);
}

void merge_strict(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config document must be a JSON object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.is_object() || !base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1,
                                        end - (dot == std::string::npos ? 0 : dot + 1));
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    Json wrapped = Json::object();
    wrapped[part] = std::move(patch);
    patch = std::move(wrapped);
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_strict(doc, patch);
}

RunConfig run_config_from_json(const Json& doc) {
  try {
    RunConfig c;
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.out = doc.at("out").get<std::string>();
    c.shapes = shapes_from_json(doc.at("pyramid").at("shapes"), "pyramid.shapes");
    c.cfsam = model_from_json(doc.at("cfsam"), c.seed);

    const Json& t = doc.at("task");
    c.task.spec.shapes = shapes_from_json(t.at("shapes"), "task.shapes");
    c.task.spec.samples = t.at("samples").get<std::size_t>();
    c.task.spec.noise = t.at("noise").get<double>();
    c.task.spec.label_bound = t.at("label_bound").get<double>();
    c.task.spec.target = parse_target(t.at("target").get<std::string>());
    c.task.steps = t.at("steps").get<std::size_t>();
    c.task.lr = t.at("lr").get<double>();
    c.task.runs = t.at("runs").get<std::size_t>();
    c.task.record_seconds = t.at("record_seconds").get<bool>();
    c.task.model = model_from_json(t.at("model"), c.seed);
    if (c.task.runs == 0) throw ConfigError("task.runs must be >= 1");
    if (c.task.steps == 0) throw ConfigError("task.steps must be >= 1");

    const Json& g = doc.at("gradcheck");
    c.gradcheck.mode = g.at("mode").get<std::string>();
    if (c.gradcheck.mode != "full" && c.gradcheck.mode != "matmul") {
      throw ConfigError("gradcheck.mode must be full or matmul, got '" + c.gradcheck.mode + "'");
    }
    c.gradcheck.shapes = shapes_from_json(g.at("shapes"), "gradcheck.shapes");
    c.gradcheck.h = g.at("h").get<double>();
    c.gradcheck.tolerance = g.at("tolerance").get<double>();
    c.gradcheck.fault_op = g.at("fault_op").get<std::string>();
    c.gradcheck.model = model_from_json(g.at("model"), c.seed);
    if (!(c.gradcheck.h > 0)) throw ConfigError("gradcheck.h must be positive");

    const Json& p = doc.at("parity");
    c.parity.fixture_dir = p.at("fixture_dir").get<std::string>();
    if (!p.at("tolerance").is_null()) c.parity.tolerance = p.at("tolerance").get<double>();
    c.parity.generate = p.at("generate").get<bool>();
    if (c.parity.tolerance && !(*c.parity.tolerance >= 0)) throw ConfigError("parity.tolerance must be >= 0");

    c.corrupt_restore = doc.at("debug").at("corrupt_restore").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace cfsam::app
