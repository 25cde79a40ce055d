// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfsam/cfsam.hpp"
#include "cfsam/errors.hpp"
#include "cfsam/gradcheck.hpp"
#include "cfsam/harness.hpp"
#include "cfsam/ops.hpp"
#include "oracles.hpp"
#include "special_weights.hpp"

namespace cfsam {
namespace {

using oracle::Real;

CfsamConfig small_config(std::size_t c, std::size_t heads, std::size_t part) {
  CfsamConfig cfg;
  cfg.unified_channels = c;
  cfg.num_heads = heads;
  cfg.part = part;
  return cfg;
}

// C x Length sequence with distinct values.
Tensor random_sequence(std::size_t c, std::size_t length, std::uint64_t seed) {
  return oracle::random_tensor({c, length}, seed);
}

TEST(Pyramid, Ssd300ShapesAndLength) {
  const auto s = ssd300_pyramid();
  ASSERT_EQ(s.size(), 6u);
  const std::vector<std::size_t> sizes = {38, 19, 10, 5, 3, 1};
  const std::vector<std::size_t> channels = {512, 1024, 512, 256, 256, 256};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s[i].height, sizes[i]);
    EXPECT_EQ(s[i].width, sizes[i]);
    EXPECT_EQ(s[i].channels, channels[i]);
  }
  EXPECT_EQ(sequence_length(s), 1940u);
  EXPECT_NO_THROW(validate_pyramid_shape(s));
  EXPECT_THROW(validate_pyramid_shape({{1, 1, 4}, {2, 2, 4}}), ShapeError);
  EXPECT_THROW(validate_pyramid_shape({}), ShapeError);
}

TEST(Config, Validation) {
  CfsamConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.unified_channels, 256u);
  EXPECT_EQ(cfg.part, 2u);
  EXPECT_EQ(cfg.ffn_hidden(), 512u);
  cfg.num_heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.num_heads = 4;
  cfg.part = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(LocalExtract, Ssd300OutputShapes) {
  // Shape bookkeeping only: run the real convs at f32 on the full SSD300 pyramid.
  const auto shapes = ssd300_pyramid();
  CfsamConfig cfg;
  const auto w = init_weights<float>(cfg, pyramid_channels(shapes), 1);
  const auto p = gen_pyramid<float>(shapes, 2);
  const auto locals = local_extract(p, w, cfg);
  ASSERT_EQ(locals.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(locals[i].shape(), (Shape{shapes[i].height, shapes[i].width, 256})) << i;
}

TEST(LocalExtract, IdentityWeightsPassThrough) {
  CfsamConfig cfg = small_config(8, 2, 2);
  auto w = init_weights<double>(cfg, {8}, 0);
  w.local[0].spatial.kernel = special::center_identity(8);
  w.local[0].spatial.bias = Tensor::zeros({8});
  w.local[0].reduce.kernel = special::eye_kernel(8, 8);
  w.local[0].reduce.bias = Tensor::zeros({8});
  FeaturePyramid<double> p{{oracle::random_tensor({4, 4, 8}, 3)}};
  const auto out = local_extract(p, w, cfg);
  EXPECT_TRUE(out[0].identical(p.maps[0]));
}

TEST(LocalExtract, MatchesTwoConvOracle) {
  CfsamConfig cfg = small_config(4, 1, 2);
  const auto w = init_weights<double>(cfg, {3}, 4);
  FeaturePyramid<double> p{{oracle::random_tensor({5, 5, 3}, 5)}};
  const auto got = local_extract(p, w, cfg)[0];
  const auto& lw = w.local[0];
  const auto mid = oracle::conv2d(p.maps[0].data(), 5, 5, 3, lw.spatial.kernel.data(), 3, 3, lw.spatial.bias.data(), 1, 1);
  const std::vector<double> mid_d(mid.begin(), mid.end());
  const auto want = oracle::conv2d(mid_d, 5, 5, 3, lw.reduce.kernel.data(), 1, 4, lw.reduce.bias.data(), 0, 1);
  EXPECT_LT(oracle::max_abs_diff(got.data(), want), 1e-12);
}

TEST(LocalExtract, ChannelMismatchThrows) {
  CfsamConfig cfg = small_config(4, 1, 2);
  const auto w = init_weights<double>(cfg, {3}, 4);
  FeaturePyramid<double> p{{oracle::random_tensor({5, 5, 2}, 5)}};
  EXPECT_THROW(local_extract(p, w, cfg), ShapeError);
}

TEST(FlattenConcat, TokenOrderAndLength) {
  const auto m = Tensor::from({2, 2, 2}, {0, 10, 1, 11, 2, 12, 3, 13});
  const auto l = flatten_concat(std::span<const Tensor>(&m, 1));
  ASSERT_EQ(l.shape(), (Shape{2, 4}));
  // Channel 0 row holds tokens (0,0),(0,1),(1,0),(1,1).
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(l.at({0, t}), static_cast<double>(t));
    EXPECT_EQ(l.at({1, t}), 10.0 + static_cast<double>(t));
  }
}

TEST(FlattenConcat, ScaleOrderAndRoundTrip) {
  const PyramidShape shapes = {{3, 4, 5}, {2, 2, 5}, {1, 1, 5}};
  std::vector<Tensor> maps;
  for (std::size_t i = 0; i < shapes.size(); ++i) maps.push_back(oracle::random_tensor(shapes[i].as_shape(), i));
  const auto l = flatten_concat(std::span<const Tensor>(maps));
  ASSERT_EQ(l.shape(), (Shape{5, 17}));
  EXPECT_EQ(l.at({2, 12}), maps[1].at({0, 0, 2}));
  EXPECT_EQ(l.at({4, 16}), maps[2].at({0, 0, 4}));
  const auto back = unflatten(l, shapes);
  for (std::size_t i = 0; i < shapes.size(); ++i) EXPECT_TRUE(back[i].identical(maps[i]));

  maps[1] = oracle::random_tensor({2, 2, 4}, 9);
  EXPECT_THROW(flatten_concat(std::span<const Tensor>(maps)), ShapeError);
}

TEST(Partition, StrideSamplingLengthSix) {
  const auto l = random_sequence(3, 6, 1);
  const auto ps = partition(l, 2);
  ASSERT_EQ(ps.blocks.shape(), (Shape{2, 3, 3}));
  EXPECT_EQ(ps.padded_length, 6u);
  const std::size_t expect[2][3] = {{0, 2, 4}, {1, 3, 5}};
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(ps.blocks.at({p, j, c}), l.at({c, expect[p][j]}));
}

TEST(Partition, PartOneIsIdentity) {
  const auto l = random_sequence(4, 7, 2);
  const auto ps = partition(l, 1);
  ASSERT_EQ(ps.blocks.shape(), (Shape{1, 7, 4}));
  EXPECT_TRUE(reshape(ps.blocks, {7, 4}).identical(transpose2d(l)));
  EXPECT_TRUE(combine(ps).identical(l));
}

TEST(Partition, IntervalIndicesHaveConstantStride) {
  for (std::size_t part = 1; part <= 5; ++part) {
    const std::size_t padded = padded_length(1940, part);
    const auto idx = interval_indices(padded, part);
    const std::size_t n = padded / part;
    for (std::size_t p = 0; p < part; ++p) {
      EXPECT_EQ(idx[p * n], p);
      for (std::size_t j = 1; j < n; ++j) EXPECT_EQ(idx[p * n + j], idx[p * n + j - 1] + part);
    }
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(padded);
    std::iota(iota.begin(), iota.end(), 0);
    EXPECT_EQ(sorted, iota);
  }
}

TEST(Partition, RoundTripBitExactWhenDivisible) {
  for (std::size_t part = 1; part <= 4; ++part) {
    for (const std::size_t length : {1940u, 12u, 60u}) {
      if (length % part != 0) continue;
      const auto l = random_sequence(3, length, part * 1000 + length);
      const auto ps = partition(l, part);
      EXPECT_EQ(ps.padded_length, length);
      EXPECT_TRUE(combine(ps).identical(l)) << "part " << part << " length " << length;
    }
  }
}

TEST(Partition, NonDivisibleMatchesInterpOracle) {
  for (const auto [length, part] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 2}, {1940, 3}, {7, 4}, {1, 3}}) {
    const auto l = random_sequence(2, length, length + part);
    const auto ps = partition(l, part);
    EXPECT_EQ(ps.padded_length, padded_length(length, part));
    EXPECT_EQ(ps.padded_length % part, 0u);
    const auto back = combine(ps);
    ASSERT_EQ(back.shape(), l.shape());
    for (std::size_t c = 0; c < 2; ++c) {
      const auto row = oracle::widen(l.data().subspan(c * length, length));
      const auto want = oracle::interp_align_corners(oracle::interp_align_corners(row, ps.padded_length), length);
      EXPECT_LT(oracle::max_abs_diff(back.data().subspan(c * length, length), want), 1e-9);
    }
  }
  const auto ps = partition(random_sequence(2, 5, 0), 2);
  ASSERT_EQ(ps.blocks.shape(), (Shape{2, 3, 2}));
}

TEST(Combine, RejectsCorruptedMetadata) {
  auto ps = partition(random_sequence(2, 6, 0), 2);
  auto bad = ps;
  bad.original_length = 9;
  EXPECT_THROW(combine(bad), ShapeError);
  bad = ps;
  bad.padded_length = 8;
  EXPECT_THROW(combine(bad), ShapeError);
  bad = ps;
  bad.part = 3;
  EXPECT_THROW(combine(bad), ShapeError);
}

TEST(TransformerUnit, MatchesStraightLineOracle) {
  Rng dims(2024);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 1 + dims.next_u64() % 6;
    const std::size_t c = 1 + dims.next_u64() % 8;
    std::vector<std::size_t> divisors;
    for (std::size_t h = 1; h <= c; ++h)
      if (c % h == 0) divisors.push_back(h);
    const std::size_t heads = divisors[dims.next_u64() % divisors.size()];
    auto cfg = small_config(c, heads, 1);
    auto w = init_weights<double>(cfg, {c}, seed);
    special::randomize(w, seed);
    const auto x = oracle::random_tensor({n, c}, mix_seed(seed, 99), -2.0, 2.0);
    const auto got = transformer_unit(x, std::span<const TransformerLayerWeights<double>>(w.layers), cfg);
    const auto want = oracle::encoder_layer(oracle::widen(x.data()), n, c, heads, w.layers[0], cfg.layer_norm_eps);
    EXPECT_LT(oracle::max_abs_diff(got.data(), want), 1e-9) << "N=" << n << " C=" << c << " heads=" << heads;
  }
}

TEST(TransformerUnit, SingleTokenClosedForm) {
  // C = 2, one head, hidden width 2. For a two-channel row [a, b] layer norm
  // gives +-s with s = ((a - b) / 2) / sqrt(((a - b) / 2)^2 + eps).
  auto cfg = small_config(2, 1, 1);
  cfg.ffn_ratio = 1.0;
  auto w = init_weights<double>(cfg, {2}, 7);
  special::randomize(w, 7);
  for (auto* norm : {&w.layers[0].attn_norm, &w.layers[0].ffn_norm}) {
    norm->gamma = Tensor::full({2}, 1.0);
    norm->beta = Tensor::zeros({2});
  }
  const double eps = cfg.layer_norm_eps;
  const double a = 0.7, b = -0.4;
  auto ln = [eps](double p, double q) {
    const double d = (p - q) / 2;
    const double s = d / std::sqrt(d * d + eps);
    return std::array<double, 2>{s, -s};
  };
  auto lin = [](const LinearWeights<double>& l, std::array<double, 2> v) {
    const auto W = l.weight.data();
    const auto B = l.bias.data();
    return std::array<double, 2>{v[0] * W[0] + v[1] * W[2] + B[0], v[0] * W[1] + v[1] * W[3] + B[1]};
  };
  const auto& L = w.layers[0];
  // One token: the softmax weight is exactly 1, so attention returns V.
  const auto v = lin(L.value, ln(a, b));
  const auto o = lin(L.output, v);
  const std::array<double, 2> x1 = {a + o[0], b + o[1]};
  auto hidden = lin(L.ffn_in, ln(x1[0], x1[1]));
  for (double& z : hidden) z = std::max(z, 0.0);
  const auto f = lin(L.ffn_out, hidden);

  const auto got = transformer_unit(Tensor::from({1, 2}, {a, b}),
                                    std::span<const TransformerLayerWeights<double>>(w.layers), cfg);
  EXPECT_NEAR(got.data()[0], x1[0] + f[0], 1e-12);
  EXPECT_NEAR(got.data()[1], x1[1] + f[1], 1e-12);
}

TEST(TransformerUnit, ZeroWeightsAreIdentity) {
  auto cfg = small_config(8, 4, 2);
  auto w = init_weights<double>(cfg, {8}, 1);
  special::zero_transformer(w);
  const auto x = oracle::random_tensor({5, 8}, 2);
  const auto y = transformer_unit(x, std::span<const TransformerLayerWeights<double>>(w.layers), cfg);
  EXPECT_TRUE(y.identical(x));
}

TEST(TransformerUnit, PermutationEquivariant) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = small_config(6, 2, 1);
    cfg.transformer_layers = 2;
    auto w = init_weights<double>(cfg, {6}, seed);
    special::randomize(w, seed);
    const auto x = oracle::random_tensor({5, 6}, mix_seed(seed, 1));
    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    const auto layers = std::span<const TransformerLayerWeights<double>>(w.layers);
    const auto y = transformer_unit(x, layers, cfg);
    const auto yp = transformer_unit(index_select(x, 0, std::span<const std::size_t>(perm)), layers, cfg);
    const auto want = index_select(y, 0, std::span<const std::size_t>(perm));
    for (std::size_t i = 0; i < yp.numel(); ++i) EXPECT_NEAR(yp.data()[i], want.data()[i], 1e-9);
  }
}

TEST(TransformerUnit, RejectsBadHeads) {
  auto cfg = small_config(6, 4, 1);
  CfsamWeights<double> w;
  EXPECT_THROW(transformer_unit(Tensor::zeros({2, 6}), std::span<const TransformerLayerWeights<double>>(w.layers), cfg),
               ConfigError);
}

TEST(PositionalEmbedding, BreaksPermutationSymmetryWhenEnabled) {
  auto cfg = small_config(4, 1, 1);
  const PyramidShape shapes = {{2, 2, 4}};
  auto w = init_weights<double>(cfg, {4}, 3);
  special::zero_transformer(w);
  const std::vector<std::size_t> pos = {0, 1, 2};
  const auto pe = positional_embedding<double>(pos, 4);
  EXPECT_EQ(pe.at({0, 0}), 0.0);
  EXPECT_EQ(pe.at({0, 1}), 1.0);
  EXPECT_NEAR(pe.at({2, 0}), std::sin(2.0), 1e-15);

  // With zero transformer weights the global stage adds exactly the embedding.
  const auto seq = random_sequence(4, 4, 5);
  cfg.use_positional_embedding = true;
  const auto g = global_extract(seq, w, cfg);
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  const auto want = add(seq, transpose2d(positional_embedding<double>(all, 4)));
  for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_NEAR(g.data()[i], want.data()[i], 1e-15);
}

TEST(FuseRestore, Ssd300ShapeContract) {
  const auto shapes = ssd300_pyramid();
  CfsamConfig cfg;
  const auto w = init_weights<float>(cfg, pyramid_channels(shapes), 3);
  const auto l = oracle::random_tensor({256, 1940}, 1).cast<float>();
  const auto out = fuse_restore(l, l, w, shapes);
  ASSERT_EQ(out.shape(), shapes);
}

TEST(FuseRestore, SelectorWeightsReturnL) {
  const std::size_t c = 5;
  const PyramidShape shapes = {{3, 3, c}, {2, 1, c}};
  auto cfg = small_config(c, 1, 2);
  auto w = init_weights<double>(cfg, pyramid_channels(shapes), 0);
  special::selector_fusion(w, c);
  special::identity_restore(w, c);
  const auto l = random_sequence(c, 11, 1);
  const auto lp = random_sequence(c, 11, 2);
  const auto out = fuse_restore(l, lp, w, shapes);
  const auto want = unflatten(l, shapes);
  for (std::size_t i = 0; i < shapes.size(); ++i) EXPECT_TRUE(out.maps[i].identical(want[i]));
}

TEST(FuseRestore, MatchesOracleComposition) {
  const std::size_t c = 4;
  const PyramidShape shapes = {{2, 3, 6}, {1, 2, 3}};
  auto cfg = small_config(c, 1, 2);
  const auto w = init_weights<double>(cfg, pyramid_channels(shapes), 8);
  const std::size_t length = 8;
  const auto l = random_sequence(c, length, 1), lp = random_sequence(c, length, 2);
  const auto out = fuse_restore(l, lp, w, shapes);

  std::size_t offset = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const MapShape& m = shapes[i];
    std::vector<Real> want(m.area() * m.channels);
    for (std::size_t t = 0; t < m.area(); ++t) {
      std::vector<Real> fused(c);
      for (std::size_t co = 0; co < c; ++co) {
        Real acc = w.fusion.bias.data()[co];
        for (std::size_t ci = 0; ci < 2 * c; ++ci) {
          const Real v = ci < c ? l.at({ci, offset + t}) : lp.at({ci - c, offset + t});
          acc += v * w.fusion.kernel.data()[ci * c + co];
        }
        fused[co] = acc;
      }
      for (std::size_t co = 0; co < m.channels; ++co) {
        Real acc = w.restore[i].bias.data()[co];
        for (std::size_t ci = 0; ci < c; ++ci) acc += fused[ci] * w.restore[i].kernel.data()[ci * m.channels + co];
        want[t * m.channels + co] = acc;
      }
    }
    EXPECT_LT(oracle::max_abs_diff(out.maps[i].data(), want), 1e-12);
    offset += m.area();
  }
  EXPECT_THROW(fuse_restore(l, lp, w, PyramidShape{{3, 3, 6}}), ShapeError);
  EXPECT_THROW(fuse_restore(l, random_sequence(c, 7, 3), w, shapes), ShapeError);
}

TEST(Forward, TransparentGlobalReproducesLocalExtract) {
  const std::size_t c = 6;
  const PyramidShape shapes = {{4, 4, c}, {2, 2, c}};
  auto cfg = small_config(c, 2, 2);
  auto w = init_weights<double>(cfg, pyramid_channels(shapes), 4);
  special::zero_transformer(w);
  special::selector_fusion(w, c);
  special::identity_restore(w, c);
  const auto p = gen_pyramid<double>(shapes, 5);
  const auto out = cfsam_forward(p, w, cfg);
  const auto locals = local_extract(p, w, cfg);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ASSERT_EQ(out.maps[i].shape(), locals[i].shape());
    for (std::size_t j = 0; j < locals[i].numel(); ++j)
      EXPECT_NEAR(out.maps[i].data()[j], locals[i].data()[j], 1e-12);
  }
}

TEST(Forward, ShapePreservationOverRandomSpecs) {
  Rng rng(77);
  for (const std::size_t n : {1u, 2u, 3u, 6u}) {
    for (int rep = 0; rep < 3; ++rep) {
      PyramidShape shapes;
      for (std::size_t i = 0; i < n; ++i) {
        shapes.push_back({1 + rng.next_u64() % 6, 1 + rng.next_u64() % 6, 1 + rng.next_u64() % 7});
      }
      std::stable_sort(shapes.begin(), shapes.end(),
                       [](const MapShape& a, const MapShape& b) { return a.area() > b.area(); });
      auto cfg = small_config(4, 2, 1 + rng.next_u64() % 4);
      const auto w = init_weights<double>(cfg, pyramid_channels(shapes), rep);
      const auto out = cfsam_forward(gen_pyramid<double>(shapes, rep), w, cfg);
      EXPECT_EQ(out.shape(), shapes);
    }
  }
}

TEST(Forward, DeterministicBitExact) {
  const PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  auto cfg = small_config(4, 1, 2);
  const auto a = cfsam_forward(gen_pyramid<double>(shapes, 1), init_weights<double>(cfg, {6, 6}, 2), cfg);
  const auto b = cfsam_forward(gen_pyramid<double>(shapes, 1), init_weights<double>(cfg, {6, 6}, 2), cfg);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(a.maps[i].identical(b.maps[i]));
}

TEST(Forward, ResidualInputAddsFeatures) {
  const PyramidShape shapes = {{3, 3, 4}};
  auto cfg = small_config(4, 1, 2);
  const auto w = init_weights<double>(cfg, {4}, 1);
  const auto p = gen_pyramid<double>(shapes, 2);
  const auto plain = cfsam_forward(p, w, cfg);
  cfg.residual_input = true;
  const auto res = cfsam_forward(p, w, cfg);
  EXPECT_TRUE(res.maps[0].identical(add(plain.maps[0], p.maps[0])));
}

TEST(Forward, StageErrorsNameTheStage) {
  const PyramidShape shapes = {{3, 3, 4}, {1, 1, 4}};
  auto cfg = small_config(4, 1, 2);
  auto w = init_weights<double>(cfg, {4, 4}, 1);
  const auto p = gen_pyramid<double>(shapes, 2);

  auto bad_restore = w;
  bad_restore.restore[1].kernel = Tensor::zeros({1, 1, 4, 5});
  bad_restore.restore[1].bias = Tensor::zeros({5});
  try {
    cfsam_forward(p, bad_restore, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "fuse_restore");
  }

  try {
    cfsam_forward(gen_pyramid<double>({{3, 3, 5}, {1, 1, 4}}, 2), w, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "local_extract");
  }

  cfg.transformer_layers = 2;
  try {
    cfsam_forward(p, w, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "global_extract");
  }
}

TEST(Forward, EndToEndGradientMatchesFiniteDifferences) {
  const PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  auto cfg = small_config(4, 1, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = init_weights<double>(cfg, {6, 6}, seed);
    const auto p = gen_pyramid<double>(shapes, mix_seed(seed, 1));
    const auto report = gradcheck_cfsam(p, w, cfg);
    EXPECT_EQ(report.groups.size(), w.named_tensors().size());
    EXPECT_LT(report.max_rel_error(), 1e-4) << "seed " << seed;
  }
}

TEST(Forward, FloatPrecisionRuns) {
  const PyramidShape shapes = {{4, 4, 6}, {2, 2, 6}};
  auto cfg = small_config(4, 1, 2);
  cfg.precision = Precision::f32;
  const auto w = init_weights<double>(cfg, {6, 6}, 0);
  const auto p = gen_pyramid<double>(shapes, 0);
  const auto d = cfsam_forward(p, w, cfg);
  const auto f = cfsam_forward(gen_pyramid<float>(shapes, 0), w.cast<float>(), cfg);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < d.maps[i].numel(); ++j)
      EXPECT_NEAR(f.maps[i].data()[j], d.maps[i].data()[j], 1e-4);
}

}  // namespace
}  // namespace cfsam
