// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cfsam/cfsam.hpp"
#include "cfsam/errors.hpp"
#include "cfsam/fixture.hpp"
#include "cfsam/ops.hpp"
#include "cfsam/random.hpp"

namespace cfsam {

template <class T>
FeaturePyramid<T> gen_pyramid(const PyramidShape& shapes, std::uint64_t seed) {
  validate_pyramid_shape(shapes);
  Rng rng(seed);
  FeaturePyramid<T> out;
  for (const MapShape& m : shapes) {
    std::vector<T> values(m.height * m.width * m.channels);
    for (T& v : values) v = static_cast<T>(rng.normal());
    out.maps.push_back(BasicTensor<T>::from(m.as_shape(), std::move(values)));
  }
  return out;
}

template <class T>
void save_pyramid(const std::filesystem::path& path, const FeaturePyramid<T>& pyramid) {
  save_tensors(path, pyramid.maps);
}

template <class T>
FeaturePyramid<T> load_pyramid(const std::filesystem::path& path) {
  FeaturePyramid<T> out;
  out.maps = load_tensors<T>(path);
  for (const auto& m : out.maps) {
    if (m.rank() != 3) throw FormatError(path.string() + ": pyramid record is not an H x W x C map");
  }
  return out;
}

template FeaturePyramid<float> gen_pyramid(const PyramidShape&, std::uint64_t);
template FeaturePyramid<double> gen_pyramid(const PyramidShape&, std::uint64_t);
template void save_pyramid(const std::filesystem::path&, const FeaturePyramid<float>&);
template void save_pyramid(const std::filesystem::path&, const FeaturePyramid<double>&);
template FeaturePyramid<float> load_pyramid(const std::filesystem::path&);
template FeaturePyramid<double> load_pyramid(const std::filesystem::path&);

SyntheticTask::SyntheticTask(TaskSpec spec) : spec_(std::move(spec)) {
  validate_pyramid_shape(spec_.shapes);
  if (spec_.samples == 0) throw ConfigError("task needs at least one sample");
  if (!(spec_.label_bound > 0)) throw ConfigError("label_bound must be positive");
  const std::size_t n = spec_.shapes.size();

  // Hidden functionals, scaled so each s_i has unit variance under N(0, 1) inputs.
  Rng proj_rng(mix_seed(spec_.seed, 0));
  std::vector<std::vector<double>> projections(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = projections[i];
    u.resize(spec_.shapes[i].channels);
    double norm = 0;
    for (double& x : u) {
      x = proj_rng.normal();
      norm += x * x;
    }
    const double gain = std::sqrt(static_cast<double>(spec_.shapes[i].area()) / norm);
    for (double& x : u) x *= gain;
  }

  Rng noise_rng(mix_seed(spec_.seed, 1));
  for (std::size_t k = 0; k < spec_.samples; ++k) {
    auto pyramid = gen_pyramid<double>(spec_.shapes, mix_seed(spec_.seed, 2 + k));
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const MapShape& m = spec_.shapes[i];
      const auto data = pyramid.maps[i].data();
      for (std::size_t p = 0; p < m.area(); ++p)
        for (std::size_t c = 0; c < m.channels; ++c) s[i] += projections[i][c] * data[p * m.channels + c];
      s[i] /= static_cast<double>(m.area());
    }
    std::vector<double> y(n);
    double total = 0;
    for (const double v : s) total += v;
    for (std::size_t i = 0; i < n; ++i) {
      double label = spec_.target == TargetMode::cross_scale ? total / std::sqrt(static_cast<double>(n)) : s[i];
      label += spec_.noise * noise_rng.normal();
      y[i] = std::clamp(label, -spec_.label_bound, spec_.label_bound);
    }
    inputs_.push_back(std::move(pyramid));
    labels_.push_back(std::move(y));
  }
}

std::string_view toy_model_name(ToyModel model) {
  return model == ToyModel::cfsam ? "cfsam" : "identity";
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Readout {
  std::vector<Tensor> weight;  // C_i
  std::vector<Tensor> bias;    // 1
};

Tensor model_loss(const SyntheticTask& task, ToyModel model, const CfsamWeights<double>* weights,
                  const CfsamConfig& config, const Readout& readout) {
  const auto& shapes = task.spec().shapes;
  std::vector<Tensor> sq_errors;
  for (std::size_t k = 0; k < task.inputs().size(); ++k) {
    const auto& input = task.inputs()[k];
    const FeaturePyramid<double> out = model == ToyModel::cfsam ? cfsam_forward(input, *weights, config) : input;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const MapShape& m = shapes[i];
      const auto pooled = mean_rows(reshape(out.maps[i], {m.area(), m.channels}));
      const auto pred = add(reshape(sum(mul(pooled, readout.weight[i])), {1}), readout.bias[i]);
      const auto diff = sub(pred, Tensor::from({1}, {task.labels()[k][i]}));
      sq_errors.push_back(mul(diff, diff));
    }
  }
  return mean(concat(sq_errors, 0));
}

}  // namespace

std::uint64_t config_hash(const TaskSpec& task, const ToyTrainOptions& options) {
  std::ostringstream os;
  os << "model=" << toy_model_name(options.model) << ";steps=" << options.steps << ";lr=" << format_double(options.lr)
     << ";seed=" << options.seed;
  const CfsamConfig& c = options.config;
  os << ";C=" << c.unified_channels << ";part=" << c.part << ";heads=" << c.num_heads
     << ";layers=" << c.transformer_layers << ";ffn=" << format_double(c.ffn_ratio)
     << ";pos=" << c.use_positional_embedding << ";res=" << c.residual_input
     << ";eps=" << format_double(c.layer_norm_eps);
  os << ";task_seed=" << task.seed << ";samples=" << task.samples << ";noise=" << format_double(task.noise)
     << ";bound=" << format_double(task.label_bound) << ";target=" << static_cast<int>(task.target);
  for (const MapShape& m : task.shapes) os << ";map=" << to_string(m);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : os.str()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

TrainResult toy_train(const SyntheticTask& task, const ToyTrainOptions& options) {
  if (options.steps == 0) throw ConfigError("toy_train: steps must be >= 1");
  if (!(options.lr >= 0.0) || !std::isfinite(options.lr)) throw ConfigError("toy_train: lr must be >= 0");
  const auto& shapes = task.spec().shapes;
  const auto channels = pyramid_channels(shapes);

  CfsamWeights<double> weights;
  if (options.model == ToyModel::cfsam) weights = init_weights<double>(options.config, channels, options.seed);
  Readout readout;
  for (const std::size_t c : channels) {
    readout.weight.push_back(Tensor::zeros({c}));
    readout.bias.push_back(Tensor::zeros({1}));
  }

  TrainResult result;
  const std::uint64_t hash = config_hash(task.spec(), options);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t step = 0; step < options.steps; ++step) {
    GradTape<double> tape;
    CfsamWeights<double> watched = weights;
    if (options.model == ToyModel::cfsam) {
      watched.visit([&](const std::string&, Tensor& t) { t = tape.watch(t); });
    }
    Readout r;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      r.weight.push_back(tape.watch(readout.weight[i]));
      r.bias.push_back(tape.watch(readout.bias[i]));
    }

    Tensor loss;
    try {
      loss = model_loss(task, options.model, options.model == ToyModel::cfsam ? &watched : nullptr, options.config, r);
    } catch (const NonFiniteError& e) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    const double seconds =
        options.record_seconds
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            : 0.0;
    result.records.push_back({step, loss.item(), seconds, options.seed, hash});
    tape.backward(loss);

    auto step_update = [&](const Tensor& current, const Tensor& leaf) {
      const auto value = current.data();
      const auto grad = leaf.grad();
      std::vector<double> next(value.begin(), value.end());
      if (!grad.empty())
        for (std::size_t j = 0; j < next.size(); ++j) next[j] -= options.lr * grad[j];
      return Tensor::from(current.shape(), std::move(next));
    };
    try {
      if (options.model == ToyModel::cfsam) {
        auto leaves = watched.named_tensors();
        weights.visit([&](const std::string& name, Tensor& t) { t = step_update(t, leaves.at(name)); });
      }
      for (std::size_t i = 0; i < channels.size(); ++i) {
        readout.weight[i] = step_update(readout.weight[i], r.weight[i]);
        readout.bias[i] = step_update(readout.bias[i], r.bias[i]);
      }
    } catch (const NonFiniteError& e) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + " update: " + e.what();
      break;
    }
  }
  return result;
}

std::string train_records_csv(const std::vector<TrainRecord>& records) {
  std::ostringstream os;
  os << "step,loss,seconds,seed\n";
  for (const TrainRecord& r : records) {
    os << r.step << ',' << format_double(r.loss) << ',' << format_double(r.seconds) << ',' << r.seed << '\n';
  }
  return os.str();
}

}  // namespace cfsam
