// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/ad/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>

#include "iwsr/ad/fft.hpp"
#include "iwsr/error.hpp"
#include "iwsr/parallel.hpp"

namespace iwsr::ad {
namespace {

template <class R>
using ImplPtr = std::shared_ptr<TensorImpl<R>>;

template <class R>
using BackwardFn = std::function<void(const TensorImpl<R>&)>;

template <class R>
Tensor<R> attach(Tensor<R> out, const std::vector<Tensor<R>>& inputs, const char* op,
                 BackwardFn<R> fn) {
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
  if (!any) return out;
  auto node = std::make_shared<Node<R>>();
  node->seq = next_node_seq();
  node->op = op;
  for (const auto& t : inputs) {
    if (t.defined()) node->inputs.push_back(t.impl());
  }
  node->backward = std::move(fn);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

// Gradient buffer of an input, or nullptr when it does not take gradients.
template <class R>
R* grad_of(const ImplPtr<R>& t) {
  return (t && t->requires_grad) ? t->grad_buffer() : nullptr;
}

// ---------------------------------------------------------------- broadcast

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_strides;
  std::vector<std::size_t> b_strides;
};

std::vector<std::size_t> contiguous_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

BroadcastPlan make_plan(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  BroadcastPlan p;
  p.out.resize(rank);
  p.a_strides.assign(rank, 0);
  p.b_strides.assign(rank, 0);
  const auto sa = contiguous_strides(a);
  const auto sb = contiguous_strides(b);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t axis = rank - 1 - k;
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " +
                           to_string(b) + " at axis " + std::to_string(axis));
    }
    p.out[axis] = std::max(da, db);
    if (k < a.size() && da != 1) p.a_strides[axis] = sa[a.size() - 1 - k];
    if (k < b.size() && db != 1) p.b_strides[axis] = sb[b.size() - 1 - k];
  }
  return p;
}

template <class F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const std::size_t rank = p.out.size();
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = p.out.back();
  const std::size_t as = p.a_strides.back();
  const std::size_t bs = p.b_strides.back();
  const std::size_t total = numel_of(p.out);
  if (inner == 0 || total == 0) return;
  const std::size_t outer = total / inner;
  std::vector<std::size_t> idx(rank - 1, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t ai = 0, bi = 0;
    for (std::size_t d = 0; d + 1 < rank; ++d) {
      ai += idx[d] * p.a_strides[d];
      bi += idx[d] * p.b_strides[d];
    }
    const std::size_t base = o * inner;
    for (std::size_t j = 0; j < inner; ++j) f(base + j, ai + j * as, bi + j * bs);
    for (std::size_t d = rank - 1; d-- > 0;) {
      if (++idx[d] < p.out[d]) break;
      idx[d] = 0;
    }
  }
}

enum class BinOp { add, sub, mul };

template <class R>
Tensor<R> binary(const Tensor<R>& a, const Tensor<R>& b, BinOp kind, const char* name) {
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  if (a.shape() == b.shape()) {
    Tensor<R> out(a.shape());
    auto od = out.data();
    const std::size_t n = od.size();
    switch (kind) {
      case BinOp::add: for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i]; break;
      case BinOp::sub: for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] - bd[i]; break;
      case BinOp::mul: for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i]; break;
    }
    auto ai = a.impl();
    auto bi = b.impl();
    return attach<R>(out, {a, b}, name, [ai, bi, kind](const TensorImpl<R>& o) {
      const std::size_t n = o.grad.size();
      const R* g = o.grad.data();
      R* ga = grad_of(ai);
      R* gb = grad_of(bi);
      switch (kind) {
        case BinOp::add:
          if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
          if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
          break;
        case BinOp::sub:
          if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
          if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
          break;
        case BinOp::mul:
          if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bi->data[i];
          if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * ai->data[i];
          break;
      }
    });
  }

  auto plan = make_plan(a.shape(), b.shape(), name);
  Tensor<R> out(plan.out);
  auto od = out.data();
  switch (kind) {
    case BinOp::add: for_each_broadcast(plan, [&](auto o, auto i, auto j) { od[o] = ad[i] + bd[j]; }); break;
    case BinOp::sub: for_each_broadcast(plan, [&](auto o, auto i, auto j) { od[o] = ad[i] - bd[j]; }); break;
    case BinOp::mul: for_each_broadcast(plan, [&](auto o, auto i, auto j) { od[o] = ad[i] * bd[j]; }); break;
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return attach<R>(out, {a, b}, name, [ai, bi, kind, plan](const TensorImpl<R>& o) {
    const R* g = o.grad.data();
    R* ga = grad_of(ai);
    R* gb = grad_of(bi);
    const R* av = ai->data.data();
    const R* bv = bi->data.data();
    for_each_broadcast(plan, [&](auto oi, auto i, auto j) {
      switch (kind) {
        case BinOp::add:
          if (ga) ga[i] += g[oi];
          if (gb) gb[j] += g[oi];
          break;
        case BinOp::sub:
          if (ga) ga[i] += g[oi];
          if (gb) gb[j] -= g[oi];
          break;
        case BinOp::mul:
          if (ga) ga[i] += g[oi] * bv[j];
          if (gb) gb[j] += g[oi] * av[i];
          break;
      }
    });
  });
}

// Elementwise map y = f(x) whose derivative is expressed through x and y.
template <class R, class Fwd, class Deriv>
Tensor<R> unary(const Tensor<R>& a, const char* name, Fwd fwd, Deriv deriv) {
  Tensor<R> out(a.shape());
  const auto& x = a.impl()->data;
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(x[i]);
  auto ai = a.impl();
  return attach<R>(out, {a}, name, [ai, deriv](const TensorImpl<R>& o) {
    R* ga = grad_of(ai);
    if (!ga) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * deriv(ai->data[i], o.data[i]);
  });
}

std::atomic<std::size_t> g_clamp_count{0};

}  // namespace

// ----------------------------------------------------------------- arithmetic

template <class R>
Tensor<R> add(const Tensor<R>& a, const Tensor<R>& b) { return binary(a, b, BinOp::add, "add"); }
template <class R>
Tensor<R> sub(const Tensor<R>& a, const Tensor<R>& b) { return binary(a, b, BinOp::sub, "sub"); }
template <class R>
Tensor<R> mul(const Tensor<R>& a, const Tensor<R>& b) { return binary(a, b, BinOp::mul, "mul"); }

template <class R>
Tensor<R> scale(const Tensor<R>& a, R factor) {
  return unary(a, "scale", [factor](R x) { return factor * x; }, [factor](R, R) { return factor; });
}

template <class R>
Tensor<R> add_scalar(const Tensor<R>& a, R value) {
  return unary(a, "add_scalar", [value](R x) { return x + value; }, [](R, R) { return R(1); });
}

template <class R>
Tensor<R> square(const Tensor<R>& a) {
  return unary(a, "square", [](R x) { return x * x; }, [](R x, R) { return R(2) * x; });
}

template <class R>
Tensor<R> abs(const Tensor<R>& a) {
  return unary(a, "abs", [](R x) { return std::abs(x); },
               [](R x, R) { return x > 0 ? R(1) : (x < 0 ? R(-1) : R(0)); });
}

template <class R>
Tensor<R> relu(const Tensor<R>& a) {
  return unary(a, "relu", [](R x) { return x > 0 ? x : R(0); }, [](R x, R) { return x > 0 ? R(1) : R(0); });
}

template <class R>
Tensor<R> sigmoid(const Tensor<R>& a) {
  return unary(a, "sigmoid", [](R x) { return R(1) / (R(1) + std::exp(-x)); },
               [](R, R y) { return y * (R(1) - y); });
}

template <class R>
Tensor<R> silu(const Tensor<R>& a) {
  return unary(
      a, "silu", [](R x) { return x / (R(1) + std::exp(-x)); },
      [](R x, R) {
        const R s = R(1) / (R(1) + std::exp(-x));
        return s * (R(1) + x * (R(1) - s));
      });
}

// ----------------------------------------------------------------- reductions

template <class R>
Tensor<R> sum(const Tensor<R>& a) {
  R acc = 0;
  for (R v : a.data()) acc += v;
  auto ai = a.impl();
  return attach<R>(Tensor<R>::scalar(acc), {a}, "sum", [ai](const TensorImpl<R>& o) {
    R* ga = grad_of(ai);
    if (!ga) return;
    const R g = o.grad[0];
    for (std::size_t i = 0; i < ai->data.size(); ++i) ga[i] += g;
  });
}

template <class R>
Tensor<R> mean(const Tensor<R>& a) {
  if (a.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), R(1) / static_cast<R>(a.numel()));
}

template <class R>
Tensor<R> sum(const Tensor<R>& a, std::size_t axis) {
  const auto& s = a.shape();
  if (axis >= s.size()) {
    throw DimensionError("sum: axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape os = s;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<R> out(os);
  auto od = out.data();
  const auto& x = a.impl()->data;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) od[o * inner + i] += x[(o * n + k) * inner + i];
  auto ai = a.impl();
  return attach<R>(out, {a}, "sum_axis", [ai, outer, inner, n](const TensorImpl<R>& o) {
    R* ga = grad_of(ai);
    if (!ga) return;
    for (std::size_t p = 0; p < outer; ++p)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i) ga[(p * n + k) * inner + i] += o.grad[p * inner + i];
  });
}

template <class R>
Tensor<R> mean(const Tensor<R>& a, std::size_t axis) {
  const std::size_t n = a.shape().at(axis);
  if (n == 0) throw ContractError("mean over an empty axis");
  return scale(sum(a, axis), R(1) / static_cast<R>(n));
}

// ---------------------------------------------------------------- shape ops

template <class R>
Tensor<R> reshape(const Tensor<R>& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw DimensionError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape) +
                         " changes the element count");
  }
  Tensor<R> out(std::move(shape), a.impl()->data);
  auto ai = a.impl();
  return attach<R>(out, {a}, "reshape", [ai](const TensorImpl<R>& o) {
    R* ga = grad_of(ai);
    if (!ga) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
  });
}

template <class R>
Tensor<R> concat(const std::vector<Tensor<R>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for shape " + to_string(first));
  }
  Shape os = first;
  os[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch " + to_string(s) + " vs " + to_string(first));
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw DimensionError("concat: axis " + std::to_string(d) + " differs (" + std::to_string(s[d]) +
                             " vs " + std::to_string(first[d]) + ")");
      }
    }
    os[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Tensor<R> out(os);
  auto od = out.data();
  const std::size_t out_row = os[axis] * inner;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t row = p.shape()[axis] * inner;
    const auto& src = p.impl()->data;
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * row), row, od.begin() + static_cast<std::ptrdiff_t>(o * out_row + off));
    off += row;
  }
  std::vector<ImplPtr<R>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return attach<R>(out, parts, "concat", [impls, offsets, outer, out_row, axis, inner](const TensorImpl<R>& o) {
    for (std::size_t k = 0; k < impls.size(); ++k) {
      R* g = grad_of(impls[k]);
      if (!g) continue;
      const std::size_t row = impls[k]->shape[axis] * inner;
      for (std::size_t p = 0; p < outer; ++p)
        for (std::size_t i = 0; i < row; ++i) g[p * row + i] += o.grad[p * out_row + offsets[k] + i];
    }
  });
}

template <class R>
Tensor<R> slice(const Tensor<R>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid on axis " + std::to_string(axis) + " of shape " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os[axis] = end - begin;
  Tensor<R> out(os);
  auto od = out.data();
  const std::size_t in_row = s[axis] * inner;
  const std::size_t row = (end - begin) * inner;
  const auto& src = a.impl()->data;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * in_row + begin * inner), row, od.begin() + static_cast<std::ptrdiff_t>(o * row));
  auto ai = a.impl();
  return attach<R>(out, {a}, "slice", [ai, outer, in_row, row, begin, inner](const TensorImpl<R>& o) {
    R* g = grad_of(ai);
    if (!g) return;
    for (std::size_t p = 0; p < outer; ++p)
      for (std::size_t i = 0; i < row; ++i) g[p * in_row + begin * inner + i] += o.grad[p * row + i];
  });
}

// -------------------------------------------------------------------- matmul

template <class R>
Tensor<R> matmul(const Tensor<R>& a, const Tensor<R>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 operands, got " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: axis 1 of lhs (" + std::to_string(k) + ") != axis 0 of rhs (" +
                         std::to_string(b.dim(0)) + ")");
  }
  Tensor<R> out({n, m});
  const R* A = a.impl()->data.data();
  const R* B = b.impl()->data.data();
  R* C = out.data().data();
  parallel_for(n, [&](std::size_t i) {
    R* c = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const R av = A[i * k + p];
      const R* bb = B + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += av * bb[j];
    }
  }, 64);
  auto ai = a.impl();
  auto bi = b.impl();
  return attach<R>(out, {a, b}, "matmul", [ai, bi, n, k, m](const TensorImpl<R>& o) {
    const R* G = o.grad.data();
    const R* A = ai->data.data();
    const R* B = bi->data.data();
    if (R* gA = grad_of(ai)) {
      parallel_for(n, [&](std::size_t i) {
        const R* g = G + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const R* bb = B + p * m;
          R acc = 0;
          for (std::size_t j = 0; j < m; ++j) acc += g[j] * bb[j];
          gA[i * k + p] += acc;
        }
      }, 64);
    }
    if (R* gB = grad_of(bi)) {
      parallel_for(k, [&](std::size_t p) {
        R* gb = gB + p * m;
        for (std::size_t i = 0; i < n; ++i) {
          const R av = A[i * k + p];
          const R* g = G + i * m;
          for (std::size_t j = 0; j < m; ++j) gb[j] += av * g[j];
        }
      });
    }
  });
}

// -------------------------------------------------------------------- conv3d

namespace {

struct ConvGeom {
  std::size_t cin, cout, in[3], out[3], k[3], s[3], p[3];
  std::size_t in_vol() const { return in[0] * in[1] * in[2]; }
  std::size_t out_vol() const { return out[0] * out[1] * out[2]; }
  std::size_t k_vol() const { return k[0] * k[1] * k[2]; }
};

// Output index range [lo, hi) along one axis for kernel tap d.
inline void tap_range(const ConvGeom& g, int axis, std::size_t d, std::size_t& lo, std::size_t& hi) {
  const long s = static_cast<long>(g.s[axis]);
  const long off = static_cast<long>(d) - static_cast<long>(g.p[axis]);
  const long n_in = static_cast<long>(g.in[axis]);
  const long n_out = static_cast<long>(g.out[axis]);
  long l = off >= 0 ? 0 : (-off + s - 1) / s;
  long h = (n_in - 1 - off) >= 0 ? (n_in - 1 - off) / s + 1 : 0;
  l = std::clamp(l, 0L, n_out);
  h = std::clamp(h, 0L, n_out);
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(std::max(l, h));
}

// Visits every (output voxel, input voxel) pair of one kernel tap.
template <class F>
inline void for_tap(const ConvGeom& g, std::size_t dt, std::size_t dz, std::size_t dx, F&& f) {
  std::size_t t0, t1, z0, z1, x0, x1;
  tap_range(g, 0, dt, t0, t1);
  tap_range(g, 1, dz, z0, z1);
  tap_range(g, 2, dx, x0, x1);
  if (x0 >= x1) return;
  for (std::size_t t = t0; t < t1; ++t) {
    const std::size_t ti = t * g.s[0] + dt - g.p[0];
    for (std::size_t z = z0; z < z1; ++z) {
      const std::size_t zi = z * g.s[1] + dz - g.p[1];
      const std::size_t orow = (t * g.out[1] + z) * g.out[2];
      const std::size_t irow = (ti * g.in[1] + zi) * g.in[2];
      f(orow, irow, x0, x1);
    }
  }
}

}  // namespace

template <class R>
Tensor<R> conv3d(const Tensor<R>& input, const Tensor<R>& kernel, const Tensor<R>& bias,
                 const Conv3dOptions& options) {
  if (input.rank() != 4) throw DimensionError("conv3d: input must be [C, T, Z, X], got " + to_string(input.shape()));
  if (kernel.rank() != 5) throw DimensionError("conv3d: kernel must be [Cout, Cin, kt, kz, kx], got " + to_string(kernel.shape()));
  if (kernel.dim(1) != input.dim(0)) {
    throw DimensionError("conv3d: axis 0 (channels) of input is " + std::to_string(input.dim(0)) +
                         " but kernel expects " + std::to_string(kernel.dim(1)));
  }
  ConvGeom g{};
  g.cin = input.dim(0);
  g.cout = kernel.dim(0);
  static const char* axis_names[3] = {"t", "z", "x"};
  for (int a = 0; a < 3; ++a) {
    g.in[a] = input.dim(1 + a);
    g.k[a] = kernel.dim(2 + a);
    g.s[a] = options.stride[a];
    g.p[a] = options.padding[a];
    if (g.s[a] == 0) throw DimensionError(std::string("conv3d: zero stride on axis ") + axis_names[a]);
    const std::size_t padded = g.in[a] + 2 * g.p[a];
    if (padded < g.k[a]) {
      throw DimensionError(std::string("conv3d: kernel larger than padded input on axis ") + axis_names[a] +
                           " (" + std::to_string(g.k[a]) + " > " + std::to_string(padded) + ")");
    }
    g.out[a] = (padded - g.k[a]) / g.s[a] + 1;
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw DimensionError("conv3d: bias must be [" + std::to_string(g.cout) + "], got " + to_string(bias.shape()));
  }

  Tensor<R> out({g.cout, g.out[0], g.out[1], g.out[2]});
  const R* X = input.impl()->data.data();
  const R* W = kernel.impl()->data.data();
  const R* B = bias.defined() ? bias.impl()->data.data() : nullptr;
  R* Y = out.data().data();
  const std::size_t sx = g.s[2];

  parallel_for(g.cout, [&](std::size_t co) {
    R* y = Y + co * g.out_vol();
    if (B) std::fill(y, y + g.out_vol(), B[co]);
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const R* x = X + ci * g.in_vol();
      const R* w = W + (co * g.cin + ci) * g.k_vol();
      for (std::size_t dt = 0; dt < g.k[0]; ++dt)
        for (std::size_t dz = 0; dz < g.k[1]; ++dz)
          for (std::size_t dx = 0; dx < g.k[2]; ++dx) {
            const R wv = w[(dt * g.k[1] + dz) * g.k[2] + dx];
            for_tap(g, dt, dz, dx, [&](std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
              R* yr = y + orow;
              const R* xr = x + irow + dx - g.p[2];
              if (sx == 1) {
                for (std::size_t q = x0; q < x1; ++q) yr[q] += wv * xr[q];
              } else {
                for (std::size_t q = x0; q < x1; ++q) yr[q] += wv * xr[q * sx];
              }
            });
          }
    }
  });

  auto xi = input.impl();
  auto wi = kernel.impl();
  auto bi = bias.defined() ? bias.impl() : ImplPtr<R>{};
  return attach<R>(out, {input, kernel, bias}, "conv3d", [xi, wi, bi, g](const TensorImpl<R>& o) {
    const R* G = o.grad.data();
    const R* X = xi->data.data();
    const R* W = wi->data.data();
    const std::size_t sx = g.s[2];
    if (R* gB = grad_of(bi)) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        R acc = 0;
        for (std::size_t v = 0; v < g.out_vol(); ++v) acc += G[co * g.out_vol() + v];
        gB[co] += acc;
      }
    }
    if (R* gX = grad_of(xi)) {
      parallel_for(g.cin, [&](std::size_t ci) {
        R* gx = gX + ci * g.in_vol();
        for (std::size_t co = 0; co < g.cout; ++co) {
          const R* gy = G + co * g.out_vol();
          const R* w = W + (co * g.cin + ci) * g.k_vol();
          for (std::size_t dt = 0; dt < g.k[0]; ++dt)
            for (std::size_t dz = 0; dz < g.k[1]; ++dz)
              for (std::size_t dx = 0; dx < g.k[2]; ++dx) {
                const R wv = w[(dt * g.k[1] + dz) * g.k[2] + dx];
                for_tap(g, dt, dz, dx, [&](std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
                  const R* gr = gy + orow;
                  R* xr = gx + irow + dx - g.p[2];
                  if (sx == 1) {
                    for (std::size_t q = x0; q < x1; ++q) xr[q] += wv * gr[q];
                  } else {
                    for (std::size_t q = x0; q < x1; ++q) xr[q * sx] += wv * gr[q];
                  }
                });
              }
        }
      });
    }
    if (R* gW = grad_of(wi)) {
      parallel_for(g.cout, [&](std::size_t co) {
        const R* gy = G + co * g.out_vol();
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const R* x = X + ci * g.in_vol();
          R* gw = gW + (co * g.cin + ci) * g.k_vol();
          for (std::size_t dt = 0; dt < g.k[0]; ++dt)
            for (std::size_t dz = 0; dz < g.k[1]; ++dz)
              for (std::size_t dx = 0; dx < g.k[2]; ++dx) {
                R acc = 0;
                for_tap(g, dt, dz, dx, [&](std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
                  const R* gr = gy + orow;
                  const R* xr = x + irow + dx - g.p[2];
                  if (sx == 1) {
                    for (std::size_t q = x0; q < x1; ++q) acc += gr[q] * xr[q];
                  } else {
                    for (std::size_t q = x0; q < x1; ++q) acc += gr[q] * xr[q * sx];
                  }
                });
                gw[(dt * g.k[1] + dz) * g.k[2] + dx] += acc;
              }
        }
      });
    }
  });
}

// ---------------------------------------------------------------- group norm

template <class R>
Tensor<R> group_norm(const Tensor<R>& x, std::size_t groups, const Tensor<R>& gamma,
                     const Tensor<R>& beta, R eps) {
  if (x.rank() < 1) throw DimensionError("group_norm: input needs a channel axis");
  const std::size_t C = x.dim(0);
  if (groups == 0 || C % groups != 0) {
    throw DimensionError("group_norm: axis 0 (channels) = " + std::to_string(C) +
                         " is not divisible by " + std::to_string(groups) + " groups");
  }
  if (gamma.numel() != C || beta.numel() != C) {
    throw DimensionError("group_norm: gamma/beta must have " + std::to_string(C) + " entries");
  }
  const std::size_t spatial = x.numel() / C;
  const std::size_t per_group = (C / groups) * spatial;
  const R* X = x.impl()->data.data();
  const R* Ga = gamma.impl()->data.data();
  const R* Be = beta.impl()->data.data();
  Tensor<R> out(x.shape());
  R* Y = out.data().data();
  auto xhat = std::make_shared<std::vector<R>>(x.numel());
  auto inv_std = std::make_shared<std::vector<R>>(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const R* xs = X + gi * per_group;
    double m = 0;
    for (std::size_t i = 0; i < per_group; ++i) m += xs[i];
    m /= static_cast<double>(per_group);
    double v = 0;
    for (std::size_t i = 0; i < per_group; ++i) v += (xs[i] - m) * (xs[i] - m);
    v /= static_cast<double>(per_group);
    const R is = static_cast<R>(1.0 / std::sqrt(v + static_cast<double>(eps)));
    (*inv_std)[gi] = is;
    for (std::size_t i = 0; i < per_group; ++i) {
      const std::size_t idx = gi * per_group + i;
      const std::size_t c = idx / spatial;
      const R h = static_cast<R>(xs[i] - m) * is;
      (*xhat)[idx] = h;
      Y[idx] = h * Ga[c] + Be[c];
    }
  }
  auto xi = x.impl();
  auto gi_ = gamma.impl();
  auto bi = beta.impl();
  return attach<R>(out, {x, gamma, beta}, "group_norm",
                   [xi, gi_, bi, xhat, inv_std, groups, per_group, spatial, C](const TensorImpl<R>& o) {
    const R* G = o.grad.data();
    const auto& H = *xhat;
    if (R* gG = grad_of(gi_)) {
      for (std::size_t c = 0; c < C; ++c) {
        R acc = 0;
        for (std::size_t s = 0; s < spatial; ++s) acc += G[c * spatial + s] * H[c * spatial + s];
        gG[c] += acc;
      }
    }
    if (R* gB = grad_of(bi)) {
      for (std::size_t c = 0; c < C; ++c) {
        R acc = 0;
        for (std::size_t s = 0; s < spatial; ++s) acc += G[c * spatial + s];
        gB[c] += acc;
      }
    }
    if (R* gX = grad_of(xi)) {
      const R* Ga = gi_->data.data();
      for (std::size_t g = 0; g < groups; ++g) {
        double mean_dh = 0, mean_dh_h = 0;
        for (std::size_t i = 0; i < per_group; ++i) {
          const std::size_t idx = g * per_group + i;
          const double dh = static_cast<double>(G[idx]) * Ga[idx / spatial];
          mean_dh += dh;
          mean_dh_h += dh * H[idx];
        }
        mean_dh /= static_cast<double>(per_group);
        mean_dh_h /= static_cast<double>(per_group);
        const double is = (*inv_std)[g];
        for (std::size_t i = 0; i < per_group; ++i) {
          const std::size_t idx = g * per_group + i;
          const double dh = static_cast<double>(G[idx]) * Ga[idx / spatial];
          gX[idx] += static_cast<R>(is * (dh - mean_dh - H[idx] * mean_dh_h));
        }
      }
    }
  });
}

// -------------------------------------------------------------- resampling

namespace {

struct Trailing3 {
  std::size_t lead, t, z, x;
};

Trailing3 split_trailing3(const Shape& s, const char* op) {
  if (s.size() < 3) throw DimensionError(std::string(op) + ": needs at least 3 axes, got " + to_string(s));
  Trailing3 r{1, s[s.size() - 3], s[s.size() - 2], s[s.size() - 1]};
  for (std::size_t i = 0; i + 3 < s.size(); ++i) r.lead *= s[i];
  return r;
}

}  // namespace

template <class R>
Tensor<R> nearest_upsample(const Tensor<R>& x, Triple f) {
  const auto d = split_trailing3(x.shape(), "nearest_upsample");
  for (int a = 0; a < 3; ++a) {
    if (f[a] == 0) throw DimensionError("nearest_upsample: zero factor on axis " + std::to_string(x.rank() - 3 + a));
  }
  Shape os = x.shape();
  os[os.size() - 3] *= f[0];
  os[os.size() - 2] *= f[1];
  os[os.size() - 1] *= f[2];
  const std::size_t T = d.t * f[0], Z = d.z * f[1], X = d.x * f[2];
  Tensor<R> out(os);
  const R* in = x.impl()->data.data();
  R* y = out.data().data();
  for (std::size_t l = 0; l < d.lead; ++l)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t z = 0; z < Z; ++z)
        for (std::size_t q = 0; q < X; ++q)
          y[((l * T + t) * Z + z) * X + q] = in[((l * d.t + t / f[0]) * d.z + z / f[1]) * d.x + q / f[2]];
  auto xi = x.impl();
  return attach<R>(out, {x}, "nearest_upsample", [xi, d, f, T, Z, X](const TensorImpl<R>& o) {
    R* g = grad_of(xi);
    if (!g) return;
    for (std::size_t l = 0; l < d.lead; ++l)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t z = 0; z < Z; ++z)
          for (std::size_t q = 0; q < X; ++q)
            g[((l * d.t + t / f[0]) * d.z + z / f[1]) * d.x + q / f[2]] += o.grad[((l * T + t) * Z + z) * X + q];
  });
}

template <class R>
Tensor<R> avg_pool(const Tensor<R>& x, Triple f) {
  const auto d = split_trailing3(x.shape(), "avg_pool");
  const std::size_t dims[3] = {d.t, d.z, d.x};
  for (int a = 0; a < 3; ++a) {
    if (f[a] == 0 || dims[a] % f[a] != 0) {
      throw DimensionError("avg_pool: axis " + std::to_string(x.rank() - 3 + a) + " of size " +
                           std::to_string(dims[a]) + " is not divisible by " + std::to_string(f[a]));
    }
  }
  const std::size_t T = d.t / f[0], Z = d.z / f[1], X = d.x / f[2];
  Shape os = x.shape();
  os[os.size() - 3] = T;
  os[os.size() - 2] = Z;
  os[os.size() - 1] = X;
  Tensor<R> out(os);
  const R inv = R(1) / static_cast<R>(f[0] * f[1] * f[2]);
  const R* in = x.impl()->data.data();
  R* y = out.data().data();
  for (std::size_t l = 0; l < d.lead; ++l)
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t q = 0; q < d.x; ++q)
          y[((l * T + t / f[0]) * Z + z / f[1]) * X + q / f[2]] += in[((l * d.t + t) * d.z + z) * d.x + q] * inv;
  auto xi = x.impl();
  return attach<R>(out, {x}, "avg_pool", [xi, d, f, T, Z, X, inv](const TensorImpl<R>& o) {
    R* g = grad_of(xi);
    if (!g) return;
    for (std::size_t l = 0; l < d.lead; ++l)
      for (std::size_t t = 0; t < d.t; ++t)
        for (std::size_t z = 0; z < d.z; ++z)
          for (std::size_t q = 0; q < d.x; ++q)
            g[((l * d.t + t) * d.z + z) * d.x + q] += o.grad[((l * T + t / f[0]) * Z + z / f[1]) * X + q / f[2]] * inv;
  });
}

// ---------------------------------------------------------- trilinear sample

std::size_t trilinear_clamp_count() { return g_clamp_count.load(); }
void reset_trilinear_clamp_count() { g_clamp_count.store(0); }

namespace {

template <class R>
struct Stencil8 {
  std::size_t offset[8];
  R weight[8];
  // d weight / d (normalised coordinate) per axis.
  R dweight[3][8];
};

template <class R>
Stencil8<R> trilinear_stencil(const R* p, const std::size_t n[3], bool& clamped) {
  std::size_t lo[3];
  R frac[3], scale[3];
  bool axis_clamped[3] = {false, false, false};
  clamped = false;
  for (int a = 0; a < 3; ++a) {
    R s = p[a];
    if (!(s >= R(0) && s <= R(1))) {
      clamped = axis_clamped[a] = true;
      s = std::isnan(s) ? R(0) : std::clamp(s, R(0), R(1));
    }
    if (n[a] <= 1) {
      lo[a] = 0;
      frac[a] = 0;
      scale[a] = 0;
      continue;
    }
    const R pos = s * static_cast<R>(n[a] - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 > n[a] - 2) i0 = n[a] - 2;
    lo[a] = i0;
    frac[a] = pos - static_cast<R>(i0);
    scale[a] = static_cast<R>(n[a] - 1);
  }
  Stencil8<R> st{};
  for (int c = 0; c < 8; ++c) {
    const int bt = (c >> 2) & 1, bz = (c >> 1) & 1, bx = c & 1;
    const std::size_t it = std::min(lo[0] + bt, n[0] - 1);
    const std::size_t iz = std::min(lo[1] + bz, n[1] - 1);
    const std::size_t ix = std::min(lo[2] + bx, n[2] - 1);
    st.offset[c] = (it * n[1] + iz) * n[2] + ix;
    const R wt = bt ? frac[0] : R(1) - frac[0];
    const R wz = bz ? frac[1] : R(1) - frac[1];
    const R wx = bx ? frac[2] : R(1) - frac[2];
    st.weight[c] = wt * wz * wx;
    const R st_ = bt ? R(1) : R(-1), sz = bz ? R(1) : R(-1), sx = bx ? R(1) : R(-1);
    st.dweight[0][c] = axis_clamped[0] ? R(0) : st_ * wz * wx * scale[0];
    st.dweight[1][c] = axis_clamped[1] ? R(0) : wt * sz * wx * scale[1];
    st.dweight[2][c] = axis_clamped[2] ? R(0) : wt * wz * sx * scale[2];
  }
  return st;
}

}  // namespace

template <class R>
Tensor<R> trilinear_sample(const Tensor<R>& grid, const Tensor<R>& points) {
  if (grid.rank() != 4) throw DimensionError("trilinear_sample: grid must be [C, T, Z, X], got " + to_string(grid.shape()));
  if (points.rank() != 2 || points.dim(1) != 3) {
    throw DimensionError("trilinear_sample: points must be [N, 3], axis 1 is " +
                         (points.rank() == 2 ? std::to_string(points.dim(1)) : std::string("missing")));
  }
  const std::size_t C = grid.dim(0), N = points.dim(0);
  const std::size_t n[3] = {grid.dim(1), grid.dim(2), grid.dim(3)};
  const std::size_t vol = n[0] * n[1] * n[2];
  auto stencils = std::make_shared<std::vector<Stencil8<R>>>(N);
  const R* P = points.impl()->data.data();
  std::size_t clamped_total = 0;
  for (std::size_t i = 0; i < N; ++i) {
    bool clamped = false;
    (*stencils)[i] = trilinear_stencil(P + 3 * i, n, clamped);
    clamped_total += clamped ? 1 : 0;
  }
  if (clamped_total) g_clamp_count.fetch_add(clamped_total);
  Tensor<R> out({N, C});
  const R* G = grid.impl()->data.data();
  R* Y = out.data().data();
  parallel_for(N, [&](std::size_t i) {
    const auto& st = (*stencils)[i];
    for (std::size_t c = 0; c < C; ++c) {
      const R* gc = G + c * vol;
      R acc = 0;
      for (int k = 0; k < 8; ++k) acc += st.weight[k] * gc[st.offset[k]];
      Y[i * C + c] = acc;
    }
  }, 256);
  auto gi = grid.impl();
  auto pi = points.impl();
  return attach<R>(out, {grid, points}, "trilinear_sample", [gi, pi, stencils, C, N, vol](const TensorImpl<R>& o) {
    const R* Go = o.grad.data();
    if (R* gG = grad_of(gi)) {
      parallel_for(C, [&](std::size_t c) {
        R* gc = gG + c * vol;
        for (std::size_t i = 0; i < N; ++i) {
          const auto& st = (*stencils)[i];
          const R g = Go[i * C + c];
          for (int k = 0; k < 8; ++k) gc[st.offset[k]] += st.weight[k] * g;
        }
      });
    }
    if (R* gP = grad_of(pi)) {
      const R* G = gi->data.data();
      for (std::size_t i = 0; i < N; ++i) {
        const auto& st = (*stencils)[i];
        for (std::size_t c = 0; c < C; ++c) {
          const R g = Go[i * C + c];
          const R* gc = G + c * vol;
          for (int a = 0; a < 3; ++a) {
            R acc = 0;
            for (int k = 0; k < 8; ++k) acc += st.dweight[a][k] * gc[st.offset[k]];
            gP[3 * i + a] += g * acc;
          }
        }
      }
    }
  });
}

// ----------------------------------------------------------------------- FFT

namespace {

// Packs [2, ...] = (real, imag) of the forward transform of x.
template <class R>
Tensor<R> fft3_packed(const Tensor<R>& x) {
  const auto d = split_trailing3(x.shape(), "fft3");
  const std::size_t vol = d.t * d.z * d.x;
  Shape os = x.shape();
  os.insert(os.begin(), 2);
  Tensor<R> out(os);
  const R* X = x.impl()->data.data();
  R* Y = out.data().data();
  const std::size_t half = x.numel();
  std::vector<fft::cplx> buf(vol);
  for (std::size_t l = 0; l < d.lead; ++l) {
    for (std::size_t i = 0; i < vol; ++i) buf[i] = {static_cast<double>(X[l * vol + i]), 0.0};
    fft::dft3(buf, d.t, d.z, d.x, false);
    for (std::size_t i = 0; i < vol; ++i) {
      Y[l * vol + i] = static_cast<R>(buf[i].real());
      Y[half + l * vol + i] = static_cast<R>(buf[i].imag());
    }
  }
  auto xi = x.impl();
  return attach<R>(out, {x}, "fft3", [xi, d, vol, half](const TensorImpl<R>& o) {
    R* g = grad_of(xi);
    if (!g) return;
    // Adjoint of the orthonormal transform: real part of its inverse.
    std::vector<fft::cplx> b(vol);
    for (std::size_t l = 0; l < d.lead; ++l) {
      for (std::size_t i = 0; i < vol; ++i) b[i] = {static_cast<double>(o.grad[l * vol + i]), static_cast<double>(o.grad[half + l * vol + i])};
      fft::dft3(b, d.t, d.z, d.x, true);
      for (std::size_t i = 0; i < vol; ++i) g[l * vol + i] += static_cast<R>(b[i].real());
    }
  });
}

template <class R>
Tensor<R> ifft3_packed(const Tensor<R>& z) {
  if (z.rank() < 4 || z.dim(0) != 2) throw DimensionError("ifft3: packed input must be [2, ..., T, Z, X]");
  Shape os(z.shape().begin() + 1, z.shape().end());
  const auto d = split_trailing3(os, "ifft3");
  const std::size_t vol = d.t * d.z * d.x;
  const std::size_t half = numel_of(os);
  Tensor<R> out(os);
  const R* Z = z.impl()->data.data();
  R* Y = out.data().data();
  std::vector<fft::cplx> buf(vol);
  for (std::size_t l = 0; l < d.lead; ++l) {
    for (std::size_t i = 0; i < vol; ++i) buf[i] = {static_cast<double>(Z[l * vol + i]), static_cast<double>(Z[half + l * vol + i])};
    fft::dft3(buf, d.t, d.z, d.x, true);
    for (std::size_t i = 0; i < vol; ++i) Y[l * vol + i] = static_cast<R>(buf[i].real());
  }
  auto zi = z.impl();
  return attach<R>(out, {z}, "ifft3", [zi, d, vol, half](const TensorImpl<R>& o) {
    R* g = grad_of(zi);
    if (!g) return;
    // Adjoint of Re(F^-1 .): forward transform of the (real) output gradient.
    std::vector<fft::cplx> b(vol);
    for (std::size_t l = 0; l < d.lead; ++l) {
      for (std::size_t i = 0; i < vol; ++i) b[i] = {static_cast<double>(o.grad[l * vol + i]), 0.0};
      fft::dft3(b, d.t, d.z, d.x, false);
      for (std::size_t i = 0; i < vol; ++i) {
        g[l * vol + i] += static_cast<R>(b[i].real());
        g[half + l * vol + i] += static_cast<R>(b[i].imag());
      }
    }
  });
}

}  // namespace

template <class R>
ComplexPair<R> fft3(const Tensor<R>& x) {
  Tensor<R> packed = fft3_packed(x);
  return {reshape(slice(packed, 0, 0, 1), x.shape()), reshape(slice(packed, 0, 1, 2), x.shape())};
}

template <class R>
Tensor<R> ifft3(const ComplexPair<R>& z) {
  if (z.real.shape() != z.imag.shape()) {
    throw DimensionError("ifft3: real part " + to_string(z.real.shape()) + " and imaginary part " +
                         to_string(z.imag.shape()) + " differ");
  }
  Shape one = z.real.shape();
  one.insert(one.begin(), 1);
  return ifft3_packed(concat(std::vector<Tensor<R>>{reshape(z.real, one), reshape(z.imag, one)}, 0));
}

// ------------------------------------------------------ explicit instantiation

#define IWSR_INSTANTIATE_OPS(R)                                                                 \
  template Tensor<R> add(const Tensor<R>&, const Tensor<R>&);                                   \
  template Tensor<R> sub(const Tensor<R>&, const Tensor<R>&);                                   \
  template Tensor<R> mul(const Tensor<R>&, const Tensor<R>&);                                   \
  template Tensor<R> scale(const Tensor<R>&, R);                                                \
  template Tensor<R> add_scalar(const Tensor<R>&, R);                                           \
  template Tensor<R> square(const Tensor<R>&);                                                  \
  template Tensor<R> abs(const Tensor<R>&);                                                     \
  template Tensor<R> relu(const Tensor<R>&);                                                    \
  template Tensor<R> sigmoid(const Tensor<R>&);                                                 \
  template Tensor<R> silu(const Tensor<R>&);                                                    \
  template Tensor<R> sum(const Tensor<R>&);                                                     \
  template Tensor<R> mean(const Tensor<R>&);                                                    \
  template Tensor<R> sum(const Tensor<R>&, std::size_t);                                        \
  template Tensor<R> mean(const Tensor<R>&, std::size_t);                                       \
  template Tensor<R> reshape(const Tensor<R>&, Shape);                                          \
  template Tensor<R> concat(const std::vector<Tensor<R>>&, std::size_t);                        \
  template Tensor<R> slice(const Tensor<R>&, std::size_t, std::size_t, std::size_t);            \
  template Tensor<R> matmul(const Tensor<R>&, const Tensor<R>&);                                \
  template Tensor<R> conv3d(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&, const Conv3dOptions&); \
  template Tensor<R> group_norm(const Tensor<R>&, std::size_t, const Tensor<R>&, const Tensor<R>&, R); \
  template Tensor<R> nearest_upsample(const Tensor<R>&, Triple);                                \
  template Tensor<R> avg_pool(const Tensor<R>&, Triple);                                        \
  template Tensor<R> trilinear_sample(const Tensor<R>&, const Tensor<R>&);                      \
  template ComplexPair<R> fft3(const Tensor<R>&);                                               \
  template Tensor<R> ifft3(const ComplexPair<R>&);

IWSR_INSTANTIATE_OPS(float)
IWSR_INSTANTIATE_OPS(double)

#undef IWSR_INSTANTIATE_OPS

}  // namespace iwsr::ad
