// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// All tolerances and case counts are fixed here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cfsam/cfsam.hpp"
#include "cfsam/flops.hpp"
#include "cfsam/gradcheck.hpp"
#include "cfsam/harness.hpp"
#include "cfsam/ops.hpp"
#include "cfsam/random.hpp"
#include "cfsam/weights.hpp"
#include "cfsam_app/app.hpp"
#include "oracles.hpp"
#include "special_weights.hpp"
#include "temp_dir.hpp"

namespace {

using namespace cfsam;
namespace fs = std::filesystem;

constexpr double kInterpTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kOracleTol = 1e-9;
constexpr double kParityTol = 1e-12;

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

CfsamConfig small_config(std::size_t c, std::size_t heads, std::size_t part) {
  CfsamConfig cfg;
  cfg.unified_channels = c;
  cfg.num_heads = heads;
  cfg.part = part;
  return cfg;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.next_u64() % (hi - lo + 1); }

std::size_t random_divisor(Rng& rng, std::size_t c) {
  std::vector<std::size_t> divisors;
  for (std::size_t h = 1; h <= c; ++h)
    if (c % h == 0) divisors.push_back(h);
  return divisors[rng.next_u64() % divisors.size()];
}

PyramidShape random_pyramid(Rng& rng, std::size_t max_dim, std::size_t cmin, std::size_t cmax) {
  PyramidShape shapes(pick(rng, 1, 6));
  for (MapShape& m : shapes) m = {pick(rng, 1, max_dim), pick(rng, 1, max_dim), pick(rng, cmin, cmax)};
  std::stable_sort(shapes.begin(), shapes.end(), [](const MapShape& a, const MapShape& b) { return a.area() > b.area(); });
  return shapes;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string drop_line_two(const std::string& text) {
  const auto a = text.find('\n');
  const auto b = text.find('\n', a + 1);
  return text.substr(0, a + 1) + text.substr(b + 1);
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return app::run_cli(args, out, err);
}

Outcome shape_contract() {
  Outcome o;
  const PyramidShape ssd = ssd300_pyramid();
  CfsamConfig cfg;
  const auto out = cfsam_forward(gen_pyramid<double>(ssd, 1), init_weights<double>(cfg, pyramid_channels(ssd), 0), cfg);
  if (out.shape() != ssd) o.fail("SSD300 output shapes differ");

  Rng rng(20260);
  for (int k = 0; k < 50; ++k) {
    const PyramidShape shapes = random_pyramid(rng, 16, 3, 32);
    auto c = small_config(16, 4, pick(rng, 1, 4));
    const auto w = init_weights<double>(c, pyramid_channels(shapes), k);
    if (cfsam_forward(gen_pyramid<double>(shapes, k), w, c).shape() != shapes) {
      o.fail("random pyramid " + std::to_string(k) + " changed shape");
    }
  }
  if (o.ok) o.detail = "SSD300 + 50 random pyramids";
  return o;
}

Outcome partition_exactness() {
  Outcome o;
  int exact = 0;
  for (std::size_t part = 1; part <= 4; ++part) {
    for (const std::size_t length : {1940u, 12u, 60u, 2u}) {
      if (length % part != 0) continue;
      const auto l = oracle::random_tensor({3, length}, part * 7919 + length);
      const auto ps = partition(l, part);
      if (ps.padded_length != length || !combine(ps).identical(l)) {
        o.fail("round trip not bit-exact for part " + std::to_string(part) + ", length " + std::to_string(length));
      }
      ++exact;
    }
  }
  double worst = 0;
  for (const auto& [length, part] :
       std::vector<std::pair<std::size_t, std::size_t>>{{1940, 3}, {1939, 2}, {5, 2}, {7, 4}, {1, 3}, {10, 4}}) {
    const auto l = oracle::random_tensor({2, length}, length * 31 + part);
    const auto ps = partition(l, part);
    const auto back = combine(ps);
    if (back.shape() != l.shape()) {
      o.fail("shape changed for length " + std::to_string(length));
      continue;
    }
    for (std::size_t c = 0; c < 2; ++c) {
      const auto row = oracle::widen(l.data().subspan(c * length, length));
      const auto want = oracle::interp_align_corners(oracle::interp_align_corners(row, ps.padded_length), length);
      worst = std::max(worst, oracle::max_abs_diff(back.data().subspan(c * length, length), want));
    }
  }
  if (!(worst < kInterpTol)) o.fail("non-divisible composition off by " + std::to_string(worst));
  if (o.ok) {
    std::ostringstream s;
    s << exact << " bit-exact round trips, non-divisible max diff " << worst;
    o.detail = s.str();
  }
  return o;
}

Outcome complexity_halving() {
  Outcome o;
  const auto q1 = count_attention(1940, 256, 4, 1).quadratic;
  const auto q2 = count_attention(1940, 256, 4, 2).quadratic;
  if (q1 != 1'926'963'200ull || q2 != 963'481'600ull) o.fail("SSD300 quadratic terms wrong");
  if (count_cfsam(CfsamConfig{}, ssd300_pyramid()).sequence_length != 1940) o.fail("SSD300 length is not 1940");
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const std::uint64_t n = 2 * pick(rng, 1, 5000);
    const std::uint64_t c = pick(rng, 1, 512);
    const auto a = count_attention(n, c, 1, 1).quadratic;
    const auto b = count_attention(n, c, 1, 2).quadratic;
    if (a != 2 * b) o.fail("N=" + std::to_string(n) + " C=" + std::to_string(c) + " not halved");
  }
  if (o.ok) o.detail = "963481600 vs 1926963200 + 20 random (N, C)";
  return o;
}

Outcome gradient_correctness() {
  Outcome o;
  const PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  const auto cfg = small_config(4, 1, 2);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = init_weights<double>(cfg, {6, 6}, seed);
    const auto report = gradcheck_cfsam(gen_pyramid<double>(shapes, mix_seed(seed, 1)), w, cfg, kGradStep);
    if (report.groups.size() != w.named_tensors().size()) o.fail("missing weight groups");
    worst = std::max(worst, report.max_rel_error());
    for (const auto& name : report.failing(kGradTol)) o.fail("seed " + std::to_string(seed) + " group " + name);
  }
  std::ostringstream s;
  s << "5 seeds, max rel error " << worst;
  if (o.ok) o.detail = s.str();
  return o;
}

Outcome transformer_correctness() {
  Outcome o;
  Rng dims(2024);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = pick(dims, 1, 6);
    const std::size_t c = pick(dims, 1, 8);
    const auto cfg = small_config(c, random_divisor(dims, c), 1);
    auto w = init_weights<double>(cfg, {c}, seed);
    special::randomize(w, seed);
    const auto x = oracle::random_tensor({n, c}, mix_seed(seed, 99), -2.0, 2.0);
    const auto got = transformer_unit(x, std::span<const TransformerLayerWeights<double>>(w.layers), cfg);
    const auto want = oracle::encoder_layer(oracle::widen(x.data()), n, c, cfg.num_heads, w.layers[0], cfg.layer_norm_eps);
    worst = std::max(worst, oracle::max_abs_diff(got.data(), want));
  }
  if (!(worst < kOracleTol)) o.fail("oracle mismatch " + std::to_string(worst));

  {
    const auto cfg = small_config(8, 4, 1);
    auto w = init_weights<double>(cfg, {8}, 1);
    special::zero_transformer(w);
    const auto x = oracle::random_tensor({5, 8}, 2);
    if (!transformer_unit(x, std::span<const TransformerLayerWeights<double>>(w.layers), cfg).identical(x)) {
      o.fail("zero weights changed the input");
    }
  }

  double equiv = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = small_config(6, 2, 1);
    cfg.transformer_layers = 2;
    auto w = init_weights<double>(cfg, {6}, seed);
    special::randomize(w, seed);
    const auto layers = std::span<const TransformerLayerWeights<double>>(w.layers);
    const auto x = oracle::random_tensor({6, 6}, mix_seed(seed, 1));
    const std::vector<std::size_t> perm = {3, 0, 5, 4, 1, 2};
    const auto yp = transformer_unit(index_select(x, 0, std::span<const std::size_t>(perm)), layers, cfg);
    const auto want = index_select(transformer_unit(x, layers, cfg), 0, std::span<const std::size_t>(perm));
    for (std::size_t i = 0; i < yp.numel(); ++i) equiv = std::max(equiv, std::abs(yp.data()[i] - want.data()[i]));
  }
  if (!(equiv < kOracleTol)) o.fail("permutation equivariance off by " + std::to_string(equiv));
  std::ostringstream s;
  s << "oracle max diff " << worst << ", equivariance max diff " << equiv;
  if (o.ok) o.detail = s.str();
  return o;
}

Outcome parameter_count() {
  Outcome o;
  Rng rng(66);
  for (int k = 0; k < 10; ++k) {
    const PyramidShape shapes = random_pyramid(rng, 12, 1, 24);
    const std::size_t heads = pick(rng, 1, 4);
    auto cfg = small_config(heads * pick(rng, 1, 8), heads, pick(rng, 1, 4));
    cfg.transformer_layers = pick(rng, 1, 3);
    cfg.ffn_ratio = static_cast<double>(pick(rng, 1, 4));
    const auto counted = count_cfsam(cfg, shapes).total_params;
    const auto actual = init_weights<double>(cfg, pyramid_channels(shapes), k).parameter_count();
    if (counted != actual) {
      o.fail("config " + std::to_string(k) + ": " + std::to_string(counted) + " != " + std::to_string(actual));
    }
  }
  if (o.ok) o.detail = "10 random configs, exact";
  return o;
}

Outcome convergence() {
  Outcome o;
  TempDir dir;
  const int code = cli({"toy-train", "--out", dir.path().string()});
  const auto rep = app::Json::parse(slurp(dir / "report.json"));
  const auto& arms = rep.at("arms");
  std::ostringstream s;
  s << "median final loss cfsam " << arms.at("cfsam").at("median_final_loss").dump() << ", identity "
    << arms.at("identity").at("median_final_loss").dump();
  if (arms.at("cfsam").at("final_losses").size() != 5) o.fail("expected 5 runs");
  if (rep.at("config").at("task").at("steps") != 300) o.fail("expected 300 steps");
  for (const char* arm : {"cfsam", "identity"}) {
    if (arms.at(arm).at("diverged_runs") != 0) o.fail(std::string(arm) + " arm diverged");
  }
  if (!rep.at("cfsam_median_not_worse").get<bool>()) o.fail(s.str());
  if (code != app::kPass) o.fail("toy-train exit code " + std::to_string(code));
  if (o.ok) o.detail = s.str();
  return o;
}

Outcome determinism_and_fixtures() {
  Outcome o;
  TempDir dir;
  const std::vector<std::string> toy = {"--set", "pyramid.shapes=[[6,6,5],[3,3,4],[1,1,3]]", "--set",
                                        "cfsam.unified_channels=8", "--seed", "11"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), toy.begin(), toy.end());
    return a;
  };

  // The report echoes the config, output path included, so both runs share it.
  const fs::path run_dir = dir / "run";
  auto twice = [&](const std::vector<std::string>& args, const std::vector<std::string>& files) {
    std::vector<std::string> first;
    cli(with(args));
    for (const auto& f : files) first.push_back(slurp(run_dir / f));
    cli(with(args));
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string again = slurp(run_dir / files[i]);
      const bool same = files[i] == "report.json" ? drop_line_two(again) == drop_line_two(first[i]) : again == first[i];
      if (!same) o.fail(args[0] + " " + files[i] + " differs between runs");
    }
  };
  for (const std::string cmd : {"shapes", "flops", "gradcheck"}) {
    twice({cmd, "--out", run_dir.string()}, {"report.json"});
  }
  twice({"toy-train", "--out", run_dir.string(), "--set", "task.steps=25", "--set", "task.runs=2", "--set",
         "task.record_seconds=false"},
        {"report.json", "toytrain_cfsam.csv", "toytrain_identity.csv"});

  for (const char* sub : {"fa", "fb"}) {
    const int code = cli(with({"parity", "--out", (dir / "o").string(), "--set",
                               "parity.fixture_dir=" + (dir / sub).string(), "--set", "parity.generate=true", "--set",
                               "parity.tolerance=1e-12"}));
    if (code != app::kPass) o.fail("parity on self-generated fixtures failed");
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir / "fa")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "fa");
    if (slurp(entry.path()) != slurp(dir / "fb" / rel)) o.fail("fixture " + rel.string() + " not bit-identical");
  }
  const auto parity = app::Json::parse(slurp(dir / "o" / "report.json"));
  if (!(parity.at("max_scaled_error").get<double>() <= kParityTol)) o.fail("parity error above 1e-12");

  const auto p64 = gen_pyramid<double>({{5, 4, 3}, {2, 2, 7}}, 4);
  save_pyramid(dir / "p64.cfst", p64);
  const auto back64 = load_pyramid<double>(dir / "p64.cfst");
  const auto p32 = gen_pyramid<float>({{5, 4, 3}}, 4);
  save_pyramid(dir / "p32.cfst", p32);
  const auto back32 = load_pyramid<float>(dir / "p32.cfst");
  if (!back64.maps[0].identical(p64.maps[0]) || !back64.maps[1].identical(p64.maps[1]) ||
      !back32.maps[0].identical(p32.maps[0])) {
    o.fail("fixture round trip not exact");
  }
  const auto cfg = small_config(8, 2, 2);
  const auto w = init_weights<double>(cfg, {3, 7}, 9);
  save_weight_bundle(dir / "w", w);
  const auto wb = load_weight_bundle<double>(dir / "w", cfg, {3, 7});
  const auto before = w.named_tensors(), after = wb.named_tensors();
  if (before.size() != after.size()) o.fail("weight bundle round trip changed the tensor count");
  for (const auto& [name, t] : before) {
    const auto it = after.find(name);
    if (it == after.end() || !it->second.identical(t)) o.fail("weight bundle round trip changed " + name);
  }
  if (o.ok) o.detail = "reports, CSVs and fixtures bit-identical; parity max diff " + parity.at("max_abs_error").dump();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shape contract", shape_contract},
      {"partition/combine exactness", partition_exactness},
      {"attention complexity halving", complexity_halving},
      {"end-to-end gradient", gradient_correctness},
      {"transformer unit", transformer_correctness},
      {"parameter count", parameter_count},
      {"toy-task convergence", convergence},
      {"determinism and fixtures", determinism_and_fixtures},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.ok) ++failures;
    std::printf("%s criterion %zu (%s): %s [%.2f s]\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
