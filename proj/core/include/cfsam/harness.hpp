// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfsam/config.hpp"
#include "cfsam/tensor.hpp"

namespace cfsam {

/// Standard-normal maps of the given shapes; identical seeds give identical pyramids.
template <class T>
FeaturePyramid<T> gen_pyramid(const PyramidShape& shapes, std::uint64_t seed);

template <class T>
void save_pyramid(const std::filesystem::path& path, const FeaturePyramid<T>& pyramid);

/// Throws FormatError if any record is not a rank-3 map.
template <class T>
FeaturePyramid<T> load_pyramid(const std::filesystem::path& path);

enum class TargetMode {
  // Every scale's label is the normalized sum of all scales' functionals.
  cross_scale,
  // Scale i's label depends on map i alone (linear in its pooled features).
  own_scale,
};

struct TaskSpec {
  PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  std::uint64_t seed = 0;
  std::size_t samples = 16;
  double noise = 0.0;
  double label_bound = 10.0;
  TargetMode target = TargetMode::cross_scale;
};

/// Fixed batch of (pyramid, per-scale label) pairs. Each scale has a hidden
/// unit-variance functional s_i = u_i . mean_pool(F_i); labels combine them
/// according to the target mode, add Gaussian noise and clamp to +-label_bound.
class SyntheticTask {
 public:
  explicit SyntheticTask(TaskSpec spec);

  const TaskSpec& spec() const { return spec_; }
  const std::vector<FeaturePyramid<double>>& inputs() const { return inputs_; }
  /// labels()[sample][scale]
  const std::vector<std::vector<double>>& labels() const { return labels_; }

 private:
  TaskSpec spec_;
  std::vector<FeaturePyramid<double>> inputs_;
  std::vector<std::vector<double>> labels_;
};

enum class ToyModel { cfsam, identity };

std::string_view toy_model_name(ToyModel model);

struct ToyTrainOptions {
  ToyModel model = ToyModel::cfsam;
  CfsamConfig config;
  std::size_t steps = 300;
  double lr = 0.05;
  std::uint64_t seed = 0;
  bool record_seconds = true;
};

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  bool diverged = false;
  std::string diagnostic;

  double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }
};

/// Full-batch gradient descent on mean squared error of a per-scale linear
/// readout over spatially pooled model outputs. The readout starts at zero;
/// CFSAM weights come from init_weights(config, channels, seed). The record for step t holds
/// the loss before the t-th update. A non-finite loss stops the run and is
/// reported through `diverged` / `diagnostic`.
TrainResult toy_train(const SyntheticTask& task, const ToyTrainOptions& options);

/// FNV-1a over the canonical text of the run parameters.
std::uint64_t config_hash(const TaskSpec& task, const ToyTrainOptions& options);

/// CSV with columns step,loss,seconds,seed; numbers in round-trip precision.
std::string train_records_csv(const std::vector<TrainRecord>& records);

}  // namespace cfsam
