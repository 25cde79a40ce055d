// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "autograd_internal.hpp"

namespace cfsam {

using detail::emit;
using detail::NodePtr;
using detail::node_of;
using detail::wants_grad;

namespace {

[[noreturn]] void shape_fail(std::string_view op, const std::string& msg) {
  throw ShapeError(std::string(op) + ": " + msg);
}

template <class T>
void require_rank(std::string_view op, const NodePtr<T>& n, std::size_t rank, const char* what) {
  if (n->shape.size() != rank) {
    shape_fail(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                       shape_to_string(n->shape));
  }
}

template <class T>
void require_same_shape(std::string_view op, const NodePtr<T>& a, const NodePtr<T>& b) {
  if (a->shape != b->shape) {
    shape_fail(op, "shape mismatch " + shape_to_string(a->shape) + " vs " + shape_to_string(b->shape));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                      std::size_t padding, std::size_t stride) {
  constexpr std::string_view op = "conv2d";
  const auto& in = node_of(input);
  const auto& ker = node_of(kernel);
  const auto& bi = node_of(bias);
  require_rank(op, in, 3, "input");
  require_rank(op, ker, 4, "kernel");
  require_rank(op, bi, 1, "bias");
  if (stride == 0) shape_fail(op, "stride must be positive");
  const std::size_t h = in->shape[0], w = in->shape[1], cin = in->shape[2];
  const std::size_t k = ker->shape[0], cout = ker->shape[3];
  if (ker->shape[1] != k) shape_fail(op, "kernel must be square, got " + shape_to_string(ker->shape));
  if (ker->shape[2] != cin) {
    shape_fail(op, "input has " + std::to_string(cin) + " channels but kernel expects " +
                       std::to_string(ker->shape[2]));
  }
  if (bi->shape[0] != cout) shape_fail(op, "bias length does not match kernel Cout");
  if (h + 2 * padding < k || w + 2 * padding < k) shape_fail(op, "kernel larger than padded input");

  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);

  // Visits every (output pixel, kernel tap) pair that lands inside the input.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
          if (iy < 0 || iy >= ih) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
            if (ix < 0 || ix >= iw) continue;
            fn((oy * wo + ox) * cout, (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin,
               (ky * k + kx) * cin * cout);
          }
        }
      }
    }
  };

  std::vector<T> out(ho * wo * cout);
  for (std::size_t p = 0; p < ho * wo; ++p) std::copy(bi->data.begin(), bi->data.end(), out.begin() + p * cout);
  {
    const T* x = in->data.data();
    const T* kw = ker->data.data();
    T* y = out.data();
    for_each_tap([&](std::size_t o, std::size_t i, std::size_t kk) {
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T v = x[i + ci];
        const T* krow = kw + kk + ci * cout;
        T* yrow = y + o;
        for (std::size_t co = 0; co < cout; ++co) yrow[co] += v * krow[co];
      }
    });
  }

  auto tape = detail::common_tape<T>(op, {&in, &ker, &bi});
  return emit<T>(op, {ho, wo, cout}, std::move(out), tape,
                 [in, ker, bi, cin, cout, for_each_tap, hw = ho * wo](const detail::TensorNode<T>& res) {
                   const T* gy = res.grad.data();
                   if (wants_grad(bi)) {
                     auto& gb = bi->ensure_grad();
                     for (std::size_t p = 0; p < hw; ++p)
                       for (std::size_t co = 0; co < cout; ++co) gb[co] += gy[p * cout + co];
                   }
                   const bool g_in = wants_grad(in);
                   const bool g_ker = wants_grad(ker);
                   if (!g_in && !g_ker) return;
                   T* gx = g_in ? in->ensure_grad().data() : nullptr;
                   T* gk = g_ker ? ker->ensure_grad().data() : nullptr;
                   const T* x = in->data.data();
                   const T* kw = ker->data.data();
                   for_each_tap([&](std::size_t o, std::size_t i, std::size_t kk) {
                     const T* grow = gy + o;
                     for (std::size_t ci = 0; ci < cin; ++ci) {
                       const std::size_t krow = kk + ci * cout;
                       if (gx) {
                         T acc = 0;
                         for (std::size_t co = 0; co < cout; ++co) acc += grow[co] * kw[krow + co];
                         gx[i + ci] += acc;
                       }
                       if (gk) {
                         const T v = x[i + ci];
                         for (std::size_t co = 0; co < cout; ++co) gk[krow + co] += v * grow[co];
                       }
                     }
                   });
                 });
}

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  constexpr std::string_view op = "matmul";
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_rank(op, an, 2, "lhs");
  require_rank(op, bn, 2, "rhs");
  const std::size_t m = an->shape[0], kd = an->shape[1], n = bn->shape[1];
  if (bn->shape[0] != kd) {
    shape_fail(op, "inner dimensions differ: " + shape_to_string(an->shape) + " x " + shape_to_string(bn->shape));
  }
  std::vector<T> out(m * n, T(0));
  const T* x = an->data.data();
  const T* y = bn->data.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out.data() + i * n;
    for (std::size_t p = 0; p < kd; ++p) {
      const T v = x[i * kd + p];
      const T* brow = y + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += v * brow[j];
    }
  }
  auto tape = detail::common_tape<T>(op, {&an, &bn});
  return emit<T>(op, {m, n}, std::move(out), tape, [an, bn, m, kd, n](const detail::TensorNode<T>& res) {
    const T* g = res.grad.data();
    if (wants_grad(an)) {
      T* ga = an->ensure_grad().data();
      const T* y = bn->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < kd; ++p) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
          ga[i * kd + p] += acc;
        }
    }
    if (wants_grad(bn)) {
      T* gb = bn->ensure_grad().data();
      const T* x = an->data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < kd; ++p) {
          const T v = x[i * kd + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += v * g[i * n + j];
        }
    }
  });
}

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  constexpr std::string_view op = "softmax";
  const auto& xn = node_of(x);
  if (xn->shape.empty()) shape_fail(op, "needs rank >= 1");
  const std::size_t n = xn->shape.back();
  const std::size_t rows = xn->data.size() / n;
  std::vector<T> out(xn->data.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xn->data.data() + r * n;
    T* o = out.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, xn->shape, std::move(out), tape, [xn, n, rows](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    T* gx = xn->ensure_grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = res.data.data() + r * n;
      const T* g = res.grad.data() + r * n;
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
    }
  });
}

template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps) {
  constexpr std::string_view op = "layer_norm";
  const auto& xn = node_of(x);
  const auto& gn = node_of(gamma);
  const auto& bn = node_of(beta);
  if (xn->shape.empty()) shape_fail(op, "needs rank >= 1");
  if (!(eps > 0)) shape_fail(op, "eps must be positive");
  const std::size_t c = xn->shape.back();
  require_rank(op, gn, 1, "gamma");
  require_rank(op, bn, 1, "beta");
  if (gn->shape[0] != c || bn->shape[0] != c) shape_fail(op, "gamma/beta length must equal channel count");
  const std::size_t rows = xn->data.size() / c;

  std::vector<T> xhat(xn->data.size());
  std::vector<T> inv_std(rows);
  std::vector<T> out(xn->data.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xn->data.data() + r * c;
    T mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(c);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (in[j] - mu) * is;
      xhat[r * c + j] = h;
      out[r * c + j] = gn->data[j] * h + bn->data[j];
    }
  }
  auto tape = detail::common_tape<T>(op, {&xn, &gn, &bn});
  return emit<T>(op, xn->shape, std::move(out), tape,
                 [xn, gn, bn, c, rows, xhat = std::move(xhat),
                  inv_std = std::move(inv_std)](const detail::TensorNode<T>& res) {
                   const T* g = res.grad.data();
                   if (wants_grad(gn)) {
                     auto& gg = gn->ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < c; ++j) gg[j] += g[r * c + j] * xhat[r * c + j];
                   }
                   if (wants_grad(bn)) {
                     auto& gb = bn->ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
                   }
                   if (!wants_grad(xn)) return;
                   T* gx = xn->ensure_grad().data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     T mean_g = 0;
                     T mean_gh = 0;
                     for (std::size_t j = 0; j < c; ++j) {
                       const T gh = g[r * c + j] * gn->data[j];
                       mean_g += gh;
                       mean_gh += gh * xhat[r * c + j];
                     }
                     mean_g /= static_cast<T>(c);
                     mean_gh /= static_cast<T>(c);
                     for (std::size_t j = 0; j < c; ++j) {
                       const T gh = g[r * c + j] * gn->data[j];
                       gx[r * c + j] += inv_std[r] * (gh - mean_g - xhat[r * c + j] * mean_gh);
                     }
                   }
                 });
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  constexpr std::string_view op = "relu";
  const auto& xn = node_of(x);
  std::vector<T> out(xn->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->data[i] > T(0) ? xn->data[i] : T(0);
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, xn->shape, std::move(out), tape, [xn](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xn->data[i] > T(0)) gx[i] += res.grad[i];
  });
}

template <class T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, std::size_t axis) {
  constexpr std::string_view op = "concat";
  if (parts.empty()) shape_fail(op, "needs at least one operand");
  std::vector<NodePtr<T>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) nodes.push_back(node_of(p));
  const Shape& ref = nodes.front()->shape;
  if (axis >= ref.size()) shape_fail(op, "axis out of range for " + shape_to_string(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& n : nodes) {
    if (n->shape.size() != ref.size()) shape_fail(op, "rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis && n->shape[i] != ref[i]) {
        shape_fail(op, "non-concat dims differ: " + shape_to_string(ref) + " vs " + shape_to_string(n->shape));
      }
    }
    out_shape[axis] += n->shape[axis];
  }
  const AxisSplit total = split_axis(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& n : nodes) {
    offsets.push_back(offset);
    const std::size_t chunk = n->shape[axis] * total.inner;
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(n->data.begin() + o * chunk, chunk, out.begin() + (o * total.extent + offset) * total.inner);
    }
    offset += n->shape[axis];
  }
  auto tape = detail::common_tape<T>(op, nodes);
  return emit<T>(op, out_shape, std::move(out), tape,
                 [nodes, offsets, total, axis](const detail::TensorNode<T>& res) {
                   for (std::size_t k = 0; k < nodes.size(); ++k) {
                     const auto& n = nodes[k];
                     if (!wants_grad(n)) continue;
                     auto& g = n->ensure_grad();
                     const std::size_t chunk = n->shape[axis] * total.inner;
                     for (std::size_t o = 0; o < total.outer; ++o) {
                       const T* src = res.grad.data() + (o * total.extent + offsets[k]) * total.inner;
                       T* dst = g.data() + o * chunk;
                       for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                     }
                   }
                 });
}

template <class T>
BasicTensor<T> slice(const BasicTensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  constexpr std::string_view op = "slice";
  const auto& xn = node_of(x);
  if (axis >= xn->shape.size()) shape_fail(op, "axis out of range for " + shape_to_string(xn->shape));
  if (length == 0 || start + length > xn->shape[axis]) {
    shape_fail(op, "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                       ") outside axis of extent " + std::to_string(xn->shape[axis]));
  }
  const AxisSplit s = split_axis(xn->shape, axis);
  Shape out_shape = xn->shape;
  out_shape[axis] = length;
  std::vector<T> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xn->data.begin() + (o * s.extent + start) * s.inner, length * s.inner,
                out.begin() + o * length * s.inner);
  }
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, out_shape, std::move(out), tape, [xn, s, start, length](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const T* src = res.grad.data() + o * length * s.inner;
      T* dst = g.data() + (o * s.extent + start) * s.inner;
      for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  constexpr std::string_view op = "reshape";
  const auto& xn = node_of(x);
  for (const std::size_t d : shape)
    if (d == 0) shape_fail(op, "dimensions must be positive");
  if (shape_numel(shape) != xn->data.size()) {
    shape_fail(op, "cannot view " + shape_to_string(xn->shape) + " as " + shape_to_string(shape));
  }
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, std::move(shape), xn->data, tape, [xn](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += res.grad[i];
  });
}

template <class T>
BasicTensor<T> transpose2d(const BasicTensor<T>& x) {
  constexpr std::string_view op = "transpose2d";
  const auto& xn = node_of(x);
  require_rank(op, xn, 2, "input");
  const std::size_t r = xn->shape[0], c = xn->shape[1];
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xn->data[i * c + j];
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, {c, r}, std::move(out), tape, [xn, r, c](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += res.grad[j * r + i];
  });
}

template <class T>
BasicTensor<T> index_select(const BasicTensor<T>& x, std::size_t axis, std::span<const std::size_t> indices) {
  constexpr std::string_view op = "index_select";
  const auto& xn = node_of(x);
  if (axis >= xn->shape.size()) shape_fail(op, "axis out of range for " + shape_to_string(xn->shape));
  if (indices.empty()) shape_fail(op, "needs at least one index");
  const AxisSplit s = split_axis(xn->shape, axis);
  for (const std::size_t i : indices)
    if (i >= s.extent) shape_fail(op, "index " + std::to_string(i) + " out of range");
  Shape out_shape = xn->shape;
  out_shape[axis] = indices.size();
  const std::size_t m = indices.size();
  std::vector<T> out(s.outer * m * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < m; ++j)
      std::copy_n(xn->data.begin() + (o * s.extent + indices[j]) * s.inner, s.inner,
                  out.begin() + (o * m + j) * s.inner);
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, out_shape, std::move(out), tape,
                 [xn, s, idx = std::vector<std::size_t>(indices.begin(), indices.end())](
                     const detail::TensorNode<T>& res) {
                   if (!wants_grad(xn)) return;
                   auto& g = xn->ensure_grad();
                   const std::size_t m = idx.size();
                   for (std::size_t o = 0; o < s.outer; ++o)
                     for (std::size_t j = 0; j < m; ++j) {
                       const T* src = res.grad.data() + (o * m + j) * s.inner;
                       T* dst = g.data() + (o * s.extent + idx[j]) * s.inner;
                       for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                     }
                 });
}

template <class T>
BasicTensor<T> interp_linear_1d(const BasicTensor<T>& x, std::size_t out_length) {
  constexpr std::string_view op = "interp_linear_1d";
  const auto& xn = node_of(x);
  require_rank(op, xn, 2, "input");
  if (out_length == 0) shape_fail(op, "output length must be positive");
  const std::size_t channels = xn->shape[0], in_length = xn->shape[1];

  struct Tap {
    std::size_t lo;
    std::size_t hi;
    T frac;  // weight of `hi`; exactly 0 when the sample lands on a grid point
  };
  std::vector<Tap> taps(out_length);
  for (std::size_t j = 0; j < out_length; ++j) {
    if (out_length == 1 || in_length == 1) {
      taps[j] = {0, 0, T(0)};
      continue;
    }
    // Exact rational position j * (Lin-1) / (Lout-1).
    const std::size_t num = j * (in_length - 1);
    const std::size_t den = out_length - 1;
    const std::size_t lo = num / den;
    const std::size_t rem = num % den;
    taps[j] = {lo, std::min(lo + 1, in_length - 1), static_cast<T>(static_cast<double>(rem) / static_cast<double>(den))};
  }

  std::vector<T> out(channels * out_length);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = xn->data.data() + c * in_length;
    for (std::size_t j = 0; j < out_length; ++j) {
      const Tap& t = taps[j];
      out[c * out_length + j] = t.frac == T(0) ? row[t.lo] : row[t.lo] * (T(1) - t.frac) + row[t.hi] * t.frac;
    }
  }
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, {channels, out_length}, std::move(out), tape,
                 [xn, taps = std::move(taps), channels, in_length, out_length](const detail::TensorNode<T>& res) {
                   if (!wants_grad(xn)) return;
                   auto& g = xn->ensure_grad();
                   for (std::size_t c = 0; c < channels; ++c)
                     for (std::size_t j = 0; j < out_length; ++j) {
                       const T gy = res.grad[c * out_length + j];
                       const Tap& t = taps[j];
                       g[c * in_length + t.lo] += gy * (T(1) - t.frac);
                       if (t.frac != T(0)) g[c * in_length + t.hi] += gy * t.frac;
                     }
                 });
}

namespace {

template <class T, class Fwd, class Bwd>
BasicTensor<T> elementwise_binary(std::string_view op, const BasicTensor<T>& a, const BasicTensor<T>& b, Fwd fwd,
                                  Bwd bwd) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_same_shape(op, an, bn);
  std::vector<T> out(an->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(an->data[i], bn->data[i]);
  auto tape = detail::common_tape<T>(op, {&an, &bn});
  return emit<T>(op, an->shape, std::move(out), tape, [an, bn, bwd](const detail::TensorNode<T>& res) {
    const bool ga = wants_grad(an);
    const bool gb = wants_grad(bn);
    T* pa = ga ? an->ensure_grad().data() : nullptr;
    T* pb = gb ? bn->ensure_grad().data() : nullptr;
    for (std::size_t i = 0; i < res.grad.size(); ++i) {
      const auto [da, db] = bwd(an->data[i], bn->data[i], res.grad[i]);
      if (pa) pa[i] += da;
      if (pb) pb[i] += db;
    }
  });
}

}  // namespace

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T g) { return std::pair<T, T>{g, g}; });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T g) { return std::pair<T, T>{g, -g}; });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T x, T y, T g) { return std::pair<T, T>{g * y, g * x}; });
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  constexpr std::string_view op = "scale";
  const auto& xn = node_of(x);
  const T f = static_cast<T>(factor);
  std::vector<T> out(xn->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->data[i] * f;
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, xn->shape, std::move(out), tape, [xn, f](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += res.grad[i] * f;
  });
}

template <class T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  constexpr std::string_view op = "add_bias";
  const auto& xn = node_of(x);
  const auto& bn = node_of(bias);
  require_rank(op, bn, 1, "bias");
  if (xn->shape.empty() || xn->shape.back() != bn->shape[0]) {
    shape_fail(op, "bias " + shape_to_string(bn->shape) + " does not match last axis of " +
                       shape_to_string(xn->shape));
  }
  const std::size_t n = bn->shape[0];
  std::vector<T> out(xn->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->data[i] + bn->data[i % n];
  auto tape = detail::common_tape<T>(op, {&xn, &bn});
  return emit<T>(op, xn->shape, std::move(out), tape, [xn, bn, n](const detail::TensorNode<T>& res) {
    if (wants_grad(xn)) {
      auto& g = xn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += res.grad[i];
    }
    if (wants_grad(bn)) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < res.grad.size(); ++i) g[i % n] += res.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  constexpr std::string_view op = "sum";
  const auto& xn = node_of(x);
  T total = 0;
  for (const T v : xn->data) total += v;
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, {}, std::vector<T>{total}, tape, [xn](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    for (T& v : g) v += res.grad[0];
  });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

template <class T>
BasicTensor<T> mean_rows(const BasicTensor<T>& x) {
  constexpr std::string_view op = "mean_rows";
  const auto& xn = node_of(x);
  require_rank(op, xn, 2, "input");
  const std::size_t r = xn->shape[0], c = xn->shape[1];
  std::vector<T> out(c, T(0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xn->data[i * c + j];
  for (T& v : out) v /= static_cast<T>(r);
  auto tape = detail::common_tape<T>(op, {&xn});
  return emit<T>(op, {c}, std::move(out), tape, [xn, r, c](const detail::TensorNode<T>& res) {
    if (!wants_grad(xn)) return;
    auto& g = xn->ensure_grad();
    const T inv = T(1) / static_cast<T>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += res.grad[j] * inv;
  });
}

#define CFSAM_INSTANTIATE_OPS(T)                                                                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,         \
                                 std::size_t, std::size_t);                                                  \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                               \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
                                     double);                                                                \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> concat(std::span<const BasicTensor<T>>, std::size_t);                               \
  template BasicTensor<T> slice(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);                \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                              \
  template BasicTensor<T> transpose2d(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> index_select(const BasicTensor<T>&, std::size_t, std::span<const std::size_t>);     \
  template BasicTensor<T> interp_linear_1d(const BasicTensor<T>&, std::size_t);                               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                               \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                         \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> mean_rows(const BasicTensor<T>&);

CFSAM_INSTANTIATE_OPS(float)
CFSAM_INSTANTIATE_OPS(double)

#undef CFSAM_INSTANTIATE_OPS

}  // namespace cfsam
