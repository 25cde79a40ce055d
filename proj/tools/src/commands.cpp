// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cfsam/cfsam.hpp"
#include "cfsam/errors.hpp"
#include "cfsam/fixture.hpp"
#include "cfsam/flops.hpp"
#include "cfsam/gradcheck.hpp"
#include "cfsam/harness.hpp"
#include "cfsam/ops.hpp"
#include "cfsam/random.hpp"
#include "cfsam/weights.hpp"
#include "cfsam_app/app.hpp"

namespace cfsam::app {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw FormatError("cannot write " + path.string());
}

// The timestamp is the only non-deterministic field and sits alone on line 2.
Json report_header(std::string_view command, int code, const Json& echo) {
  Json j;
  j["generated_at"] = utc_timestamp();
  j["command"] = command;
  j["status"] = code == kPass ? "pass" : "fail";
  j["exit_code"] = code;
  j["config"] = echo;
  return j;
}

void write_report(const RunConfig& config, Json report) {
  write_text(fs::path(config.out) / "report.json", report.dump(2) + "\n");
}

std::string shape_cell(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

template <class T>
int shapes_impl(const RunConfig& config, const Json& echo, std::ostream& out) {
  const auto channels = pyramid_channels(config.shapes);
  const auto pyramid = gen_pyramid<T>(config.shapes, mix_seed(config.seed, 1));
  auto weights = init_weights<T>(config.cfsam, channels, config.seed);
  if (config.corrupt_restore) {
    auto& last = weights.restore.back();
    const std::size_t wrong = channels.back() + 1;
    last.kernel = BasicTensor<T>::zeros({1, 1, config.cfsam.unified_channels, wrong});
    last.bias = BasicTensor<T>::zeros({wrong});
  }

  Json body = Json::array();
  int code = kPass;
  std::string failed_stage, error;
  try {
    const auto result = cfsam_forward(pyramid, weights, config.cfsam);
    out << "scale  input          output         match\n";
    for (std::size_t i = 0; i < config.shapes.size(); ++i) {
      const Shape in = config.shapes[i].as_shape();
      const Shape got = i < result.size() ? result.maps[i].shape() : Shape{};
      const bool match = in == got;
      if (!match) code = kCheckFailed;
      out << std::left << std::setw(7) << i << std::setw(15) << shape_cell(in) << std::setw(15) << shape_cell(got)
          << (match ? "yes" : "NO") << "\n";
      body.push_back({{"scale", i}, {"input", in}, {"output", got}, {"match", match}});
    }
    if (result.size() != config.shapes.size()) code = kCheckFailed;
  } catch (const StageError& e) {
    code = kCheckFailed;
    failed_stage = e.stage();
    error = e.what();
  } catch (const NonFiniteError& e) {
    code = kCheckFailed;
    failed_stage = "numeric";
    error = e.what();
  }
  if (!failed_stage.empty()) out << "FAILED in stage " << failed_stage << ": " << error << "\n";
  out << (code == kPass ? "shapes: pass" : "shapes: FAIL") << "\n";

  Json report = report_header("shapes", code, echo);
  report["precision"] = precision_name(precision_of<T>());
  report["maps"] = body;
  if (!failed_stage.empty()) {
    report["failed_stage"] = failed_stage;
    report["error"] = error;
  }
  write_report(config, std::move(report));
  return code;
}

}  // namespace

int cmd_shapes(const RunConfig& config, const Json& echo, std::ostream& out) {
  return config.cfsam.precision == Precision::f32 ? shapes_impl<float>(config, echo, out)
                                                  : shapes_impl<double>(config, echo, out);
}

int cmd_gradcheck(const RunConfig& config, const Json& echo, std::ostream& out) {
  const GradCheckOptions& g = config.gradcheck;
  std::optional<testing::ScopedBackwardFault> fault;
  if (!g.fault_op.empty()) fault.emplace(g.fault_op);

  GradCheckReport report;
  if (g.mode == "matmul") {
    auto random = [&](Shape s, std::uint64_t stream) {
      Rng rng(mix_seed(config.seed, stream));
      std::vector<double> v(shape_numel(s));
      for (double& x : v) x = rng.uniform(-1.0, 1.0);
      return Tensor::from(std::move(s), std::move(v));
    };
    const Tensor probe = random({3, 2}, 3);
    NamedTensors params = {{"a", random({3, 4}, 1)}, {"b", random({4, 2}, 2)}};
    report = gradcheck(params, [&](const std::vector<Tensor>& p) { return sum(mul(matmul(p[0], p[1]), probe)); },
                       g.h);
  } else {
    CfsamConfig model = g.model;
    model.precision = Precision::f64;
    const auto pyramid = gen_pyramid<double>(g.shapes, mix_seed(config.seed, 1));
    const auto weights = init_weights<double>(model, pyramid_channels(g.shapes), config.seed);
    report = gradcheck_cfsam(pyramid, weights, model, g.h);
  }

  const auto failing = report.failing(g.tolerance);
  const int code = failing.empty() ? kPass : kCheckFailed;

  std::ostringstream csv;
  csv << "group,elements,max_rel_error\n";
  Json groups = Json::array();
  out << "group                               max_rel_error\n";
  for (const auto& grp : report.groups) {
    const bool ok = grp.max_rel_error < g.tolerance;
    csv << grp.name << ',' << grp.elements << ',' << Json(grp.max_rel_error).dump() << '\n';
    groups.push_back({{"group", grp.name}, {"elements", grp.elements}, {"max_rel_error", grp.max_rel_error},
                      {"pass", ok}});
    out << std::left << std::setw(36) << grp.name << std::scientific << std::setprecision(3) << grp.max_rel_error
        << (ok ? "" : "  FAIL") << "\n";
    out << std::defaultfloat;
  }
  for (const auto& name : failing) out << "gradient mismatch in group " << name << "\n";
  out << (code == kPass ? "gradcheck: pass" : "gradcheck: FAIL") << " (tolerance " << g.tolerance << ")\n";

  write_text(fs::path(config.out) / "gradcheck.csv", csv.str());
  Json rep = report_header("gradcheck", code, echo);
  rep["mode"] = g.mode;
  rep["tolerance"] = g.tolerance;
  rep["max_rel_error"] = report.max_rel_error();
  rep["failing_groups"] = failing;
  rep["groups"] = groups;
  write_report(config, std::move(rep));
  return code;
}

int cmd_flops(const RunConfig& config, const Json& echo, std::ostream& out) {
  const FlopReport configured = count_cfsam(config.cfsam, config.shapes);
  CfsamConfig single = config.cfsam;
  single.part = 1;
  const FlopReport baseline = count_cfsam(single, config.shapes);

  auto stages_json = [](const FlopReport& r) {
    Json arr = Json::array();
    for (const auto& s : r.stages) {
      arr.push_back({{"stage", s.stage}, {"macs", s.macs}, {"flops", s.flops()}, {"params", s.params},
                     {"informational", s.informational}});
    }
    return arr;
  };

  const std::uint64_t q1 = baseline.stage("attention.scores").macs;
  const std::uint64_t qp = configured.stage("attention.scores").macs;
  const bool exact_division = qp != 0 && q1 % qp == 0;
  const std::uint64_t p = config.cfsam.part;
  const bool reduced_by_part = qp * p == q1;

  write_text(fs::path(config.out) / "flops.csv", configured.to_csv());
  write_text(fs::path(config.out) / "flops_part1.csv", baseline.to_csv());

  Json rep = report_header("flops", kPass, echo);
  rep["sequence_length"] = configured.sequence_length;
  rep["padded_length"] = configured.padded_length;
  rep["total_macs"] = configured.total_macs;
  rep["total_flops"] = configured.total_flops();
  rep["total_params"] = configured.total_params;
  rep["stages"] = stages_json(configured);
  Json& cmp = rep["part_comparison"];
  cmp["part"] = p;
  cmp["quadratic_macs_part1"] = q1;
  cmp["quadratic_macs_configured"] = qp;
  cmp["ratio"] = exact_division ? Json(q1 / qp) : Json(static_cast<double>(q1) / static_cast<double>(qp));
  cmp["reduced_exactly_by_part"] = reduced_by_part;
  cmp["total_macs_part1"] = baseline.total_macs;
  cmp["total_macs_configured"] = configured.total_macs;
  write_report(config, std::move(rep));

  out << configured.to_csv();
  out << "attention quadratic MACs: part=1 " << q1 << ", part=" << p << " " << qp
      << (reduced_by_part ? " (exactly 1/part)" : "") << "\n";
  return kPass;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int cmd_toytrain(const RunConfig& config, const Json& echo, std::ostream& out) {
  const TaskOptions& t = config.task;
  struct Arm {
    ToyModel model = ToyModel::cfsam;
    std::string csv = "step,loss,seconds,seed\n";
    std::vector<double> finals;
    std::vector<std::string> diagnostics;
  };
  std::vector<Arm> arms(2);
  arms[0].model = ToyModel::cfsam;
  arms[1].model = ToyModel::identity;

  for (std::size_t r = 0; r < t.runs; ++r) {
    const std::uint64_t seed = config.seed + r;
    TaskSpec spec = t.spec;
    spec.seed = mix_seed(seed, 1000);
    const SyntheticTask task(spec);
    for (Arm& arm : arms) {
      ToyTrainOptions opt;
      opt.model = arm.model;
      opt.config = t.model;
      opt.config.precision = Precision::f64;
      opt.steps = t.steps;
      opt.lr = t.lr;
      opt.seed = seed;
      opt.record_seconds = t.record_seconds;
      const TrainResult res = toy_train(task, opt);
      const std::string csv = train_records_csv(res.records);
      arm.csv += csv.substr(csv.find('\n') + 1);
      if (res.diverged) {
        arm.diagnostics.push_back("seed " + std::to_string(seed) + ": " + res.diagnostic);
      } else {
        arm.finals.push_back(res.final_loss());
      }
    }
  }

  Json rep_arms = Json::object();
  bool any_diverged = false;
  for (const Arm& arm : arms) {
    const std::string name(toy_model_name(arm.model));
    write_text(fs::path(config.out) / ("toytrain_" + name + ".csv"), arm.csv);
    Json a;
    a["final_losses"] = arm.finals;
    a["median_final_loss"] = arm.finals.empty() ? Json(nullptr) : Json(median(arm.finals));
    a["diverged_runs"] = arm.diagnostics.size();
    a["diagnostics"] = arm.diagnostics;
    rep_arms[name] = a;
    any_diverged = any_diverged || !arm.diagnostics.empty();
    out << name << ": runs " << t.runs << ", diverged " << arm.diagnostics.size();
    if (!arm.finals.empty()) out << ", median final loss " << Json(median(arm.finals)).dump();
    out << "\n";
    for (const auto& d : arm.diagnostics) out << "  diverged: " << d << "\n";
  }

  std::string lower = "undetermined";
  bool cfsam_not_worse = false;
  if (!any_diverged) {
    const double mc = median(arms[0].finals), mi = median(arms[1].finals);
    lower = mc < mi ? "cfsam" : (mi < mc ? "identity" : "tie");
    cfsam_not_worse = mc <= mi;
  }
  const int code = !any_diverged && cfsam_not_worse ? kPass : kCheckFailed;
  out << "lower median final loss: " << lower << "\n";
  out << (code == kPass ? "toy-train: pass" : "toy-train: FAIL") << "\n";

  Json rep = report_header("toy-train", code, echo);
  rep["seeds"] = Json::array();
  for (std::size_t r = 0; r < t.runs; ++r) rep["seeds"].push_back(config.seed + r);
  rep["arms"] = rep_arms;
  rep["lower_median_arm"] = lower;
  rep["cfsam_median_not_worse"] = cfsam_not_worse;
  write_report(config, std::move(rep));
  return code;
}

namespace {

struct ParityOutcome {
  double max_abs_error = 0;
  double max_scaled_error = 0;  // |a - b| / max(1, |b|)
  std::size_t compared = 0;
};

template <class T>
void generate_fixtures(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  Json doc;
  doc["pyramid"]["shapes"] = shapes_to_json(config.shapes);
  doc["cfsam"] = run_config_to_json(config)["cfsam"];
  write_text(dir / "config.json", doc.dump(2) + "\n");
  const auto pyramid = gen_pyramid<T>(config.shapes, mix_seed(config.seed, 1));
  const auto weights = init_weights<T>(config.cfsam, pyramid_channels(config.shapes), config.seed);
  save_pyramid(dir / "input.cfst", pyramid);
  save_weight_bundle(dir / "weights", weights);
  save_pyramid(dir / "expected.cfst", cfsam_forward(pyramid, weights, config.cfsam));
}

template <class T>
ParityOutcome compare_fixtures(const fs::path& dir, const PyramidShape& shapes, const CfsamConfig& cfsam) {
  const auto input = load_pyramid<T>(dir / "input.cfst");
  const auto expected = load_pyramid<T>(dir / "expected.cfst");
  if (input.shape() != shapes) throw FormatError("input.cfst does not match pyramid.shapes in config.json");
  if (expected.shape() != shapes) throw FormatError("expected.cfst does not match pyramid.shapes in config.json");
  const auto weights = load_weight_bundle<T>(dir / "weights", cfsam, pyramid_channels(shapes));
  const auto got = cfsam_forward(input, weights, cfsam);
  ParityOutcome o;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto a = got.maps[i].data();
    const auto b = expected.maps[i].data();
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double diff = std::abs(static_cast<double>(a[j]) - static_cast<double>(b[j]));
      o.max_abs_error = std::max(o.max_abs_error, diff);
      o.max_scaled_error = std::max(o.max_scaled_error, diff / std::max(1.0, std::abs(static_cast<double>(b[j]))));
      ++o.compared;
    }
  }
  return o;
}

}  // namespace

int cmd_parity(const RunConfig& config, const Json& echo, std::ostream& out) {
  if (config.parity.fixture_dir.empty()) throw ConfigError("parity.fixture_dir is required");
  const fs::path dir = config.parity.fixture_dir;
  if (config.parity.generate) {
    if (config.cfsam.precision == Precision::f32) {
      generate_fixtures<float>(config, dir);
    } else {
      generate_fixtures<double>(config, dir);
    }
    out << "wrote fixtures to " << dir.string() << "\n";
  }

  std::ifstream cfg_file(dir / "config.json");
  if (!cfg_file) throw ConfigError("fixture directory lacks config.json: " + dir.string());
  Json fixture_doc = Json::parse(cfg_file, nullptr, false);
  if (fixture_doc.is_discarded()) throw ConfigError("malformed config.json in " + dir.string());
  Json merged = default_config_json();
  merge_strict(merged, fixture_doc);
  const RunConfig fixture_cfg = run_config_from_json(merged);

  std::ifstream input(dir / "input.cfst", std::ios::binary);
  if (!input) throw FormatError("missing input.cfst in " + dir.string());
  const Precision precision = peek_fixture_dtype(input);
  CfsamConfig cfsam = fixture_cfg.cfsam;
  cfsam.precision = precision;
  const double tolerance =
      config.parity.tolerance.value_or(precision == Precision::f32 ? 1e-6 : 1e-10);

  const ParityOutcome o = precision == Precision::f32
                              ? compare_fixtures<float>(dir, fixture_cfg.shapes, cfsam)
                              : compare_fixtures<double>(dir, fixture_cfg.shapes, cfsam);
  const int code = o.max_scaled_error <= tolerance ? kPass : kCheckFailed;

  out << "compared " << o.compared << " values at " << precision_name(precision) << ": max |diff| "
      << Json(o.max_abs_error).dump() << ", max scaled diff " << Json(o.max_scaled_error).dump() << ", tolerance "
      << Json(tolerance).dump() << "\n";
  out << (code == kPass ? "parity: pass" : "parity: FAIL") << "\n";

  Json rep = report_header("parity", code, echo);
  rep["fixture_dir"] = dir.string();
  rep["precision"] = precision_name(precision);
  rep["tolerance"] = tolerance;
  rep["compared_values"] = o.compared;
  rep["max_abs_error"] = o.max_abs_error;
  rep["max_scaled_error"] = o.max_scaled_error;
  write_report(config, std::move(rep));
  return code;
}

}  // namespace cfsam::app
