// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cfsam/config.hpp"

// Closed-form multiply-accumulate (MAC) and parameter counts per stage.
// FLOPs are reported as 2 * MACs.
namespace cfsam {

struct StageCost {
  std::string stage;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  // Informational entries (softmax / normalization arithmetic) are excluded from totals.
  bool informational = false;

  std::uint64_t flops() const { return 2 * macs; }
};

struct AttentionCost {
  std::uint64_t projections = 0;  // Q, K, V, O over all padded tokens
  std::uint64_t quadratic = 0;    // QK^T and AV within each block

  std::uint64_t total() const { return projections + quadratic; }
};

struct FlopReport {
  std::vector<StageCost> stages;
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;

  CfsamConfig config;
  PyramidShape shapes;
  std::size_t sequence_length = 0;
  std::size_t padded_length = 0;

  std::uint64_t total_flops() const { return 2 * total_macs; }
  /// Throws std::out_of_range for unknown stage names.
  const StageCost& stage(std::string_view name) const;
  /// Columns: stage, macs, flops, params. Informational rows are marked in the stage name suffix.
  std::string to_csv() const;
};

/// H * W * k^2 * Cin * Cout for a stride-1 same-size output.
std::uint64_t count_conv(std::uint64_t height, std::uint64_t width, std::uint64_t k, std::uint64_t cin,
                         std::uint64_t cout);

/// Cost of one attention layer over `tokens` tokens split into `part` interleaved blocks.
/// Head count does not change the MAC total; it is accepted for interface symmetry.
AttentionCost count_attention(std::uint64_t tokens, std::uint64_t channels, std::uint64_t heads,
                              std::uint64_t part);

FlopReport count_cfsam(const CfsamConfig& config, const PyramidShape& shapes);

}  // namespace cfsam
