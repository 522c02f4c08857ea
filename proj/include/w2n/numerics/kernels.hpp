// Copyright 2026 The w2n Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Forward kernels on plain tensors. The differentiable wrappers in
// autodiff.hpp call these and add the matching backward rules.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "w2n/numerics/tensor.hpp"

namespace w2n::kernels {

// ---------------------------------------------------------------- matmul

/// Batch layout for a[..., m, p] x b[..., p, n] with leading-dimension broadcasting.
struct MatmulPlan {
  Shape out_shape;
  std::size_t m = 0, p = 0, n = 0;
  std::vector<std::size_t> a_off, b_off;  // per output batch entry
};

inline MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a) + " and " + shape_str(b));
  }
  MatmulPlan plan;
  plan.m = a[a.size() - 2];
  plan.p = a[a.size() - 1];
  plan.n = b[b.size() - 1];
  if (b[b.size() - 2] != plan.p) {
    throw DimensionError("matmul inner extents differ: " + shape_str(a) + " x " + shape_str(b));
  }
  const std::size_t ra = a.size() - 2, rb = b.size() - 2;
  const std::size_t r = std::max(ra, rb);
  Shape batch(r);
  std::vector<std::size_t> sa(r, 0), sb(r, 0);
  std::size_t stride_a = plan.m * plan.p, stride_b = plan.p * plan.n;
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t axis = r - 1 - i;
    const std::size_t ea = i < ra ? a[ra - 1 - i] : 1;
    const std::size_t eb = i < rb ? b[rb - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError("matmul batch extents not broadcast-compatible: " + shape_str(a) + " x " + shape_str(b));
    }
    batch[axis] = std::max(ea, eb);
    sa[axis] = ea == 1 ? 0 : stride_a;
    sb[axis] = eb == 1 ? 0 : stride_b;
    stride_a *= ea;
    stride_b *= eb;
  }
  plan.out_shape = batch;
  plan.out_shape.push_back(plan.m);
  plan.out_shape.push_back(plan.n);
  const std::size_t nbatch = shape_numel(batch);
  plan.a_off.resize(nbatch);
  plan.b_off.resize(nbatch);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t bi = 0; bi < nbatch; ++bi) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t ax = 0; ax < r; ++ax) {
      oa += idx[ax] * sa[ax];
      ob += idx[ax] * sb[ax];
    }
    plan.a_off[bi] = oa;
    plan.b_off[bi] = ob;
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < batch[ax]) break;
      idx[ax] = 0;
    }
  }
  return plan;
}

/// c += a * b for row-major a (m x p), b (p x n), c (m x n).
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

/// da += dc * b^T
inline void gemm_acc_nt(const double* dc, const double* b, double* da, std::size_t m, std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dci = dc + i * n;
    double* dai = da + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double* bk = b + k * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dci[j] * bk[j];
      dai[k] += s;
    }
  }
}

/// db += a^T * dc
inline void gemm_acc_tn(const double* a, const double* dc, double* db, std::size_t m, std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * p;
    const double* dci = dc + i * n;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      double* dbk = db + k * n;
      for (std::size_t j = 0; j < n; ++j) dbk[j] += aik * dci[j];
    }
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan plan = plan_matmul(a.shape(), b.shape());
  Tensor out(plan.out_shape);
  const std::size_t oc = plan.m * plan.n;
  for (std::size_t bi = 0; bi < plan.a_off.size(); ++bi) {
    gemm_acc(a.data().data() + plan.a_off[bi], b.data().data() + plan.b_off[bi], out.data().data() + bi * oc, plan.m,
             plan.p, plan.n);
  }
  return out;
}

// ---------------------------------------------------------------- layout

inline Shape permuted_shape(const Shape& s, const std::vector<std::size_t>& axes) {
  if (axes.size() != s.size()) throw DimensionError("permutation rank differs from " + shape_str(s));
  std::vector<bool> seen(s.size(), false);
  Shape out(s.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= s.size() || seen[axes[i]]) throw DimensionError("invalid permutation for " + shape_str(s));
    seen[axes[i]] = true;
    out[i] = s[axes[i]];
  }
  return out;
}

/// Source offset for every destination element of a permutation.
inline std::vector<std::size_t> permutation_map(const Shape& s, const std::vector<std::size_t>& axes) {
  const Shape out = permuted_shape(s, axes);
  std::vector<std::size_t> in_stride(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) in_stride[i - 1] = in_stride[i] * s[i];
  std::vector<std::size_t> map(shape_numel(s));
  std::vector<std::size_t> idx(out.size(), 0);
  for (std::size_t o = 0; o < map.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t ax = 0; ax < out.size(); ++ax) off += idx[ax] * in_stride[axes[ax]];
    map[o] = off;
    for (std::size_t ax = out.size(); ax-- > 0;) {
      if (++idx[ax] < out[ax]) break;
      idx[ax] = 0;
    }
  }
  return map;
}

inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const auto map = permutation_map(x.shape(), axes);
  Tensor out(permuted_shape(x.shape(), axes));
  for (std::size_t o = 0; o < map.size(); ++o) out[o] = x[map[o]];
  return out;
}

inline std::vector<std::size_t> swap_last2_axes(std::size_t rank) {
  if (rank < 2) throw DimensionError("transpose needs rank >= 2");
  std::vector<std::size_t> axes(rank);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[rank - 1], axes[rank - 2]);
  return axes;
}

inline Tensor transpose_last2(const Tensor& x) { return permute(x, swap_last2_axes(x.rank())); }

// ---------------------------------------------------------------- softmax

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, int axis) {
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? r + axis : axis;
  if (a < 0 || a >= r) throw DimensionError("axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  AxisSplit sp;
  for (int i = 0; i < a; ++i) sp.outer *= s[static_cast<std::size_t>(i)];
  sp.len = s[static_cast<std::size_t>(a)];
  for (int i = a + 1; i < r; ++i) sp.inner *= s[static_cast<std::size_t>(i)];
  return sp;
}

/// Max-subtracted softmax along `axis`. With `causal`, the axis must be the
/// last one and entries j > i (i = row index in the second-to-last axis) get
/// probability exactly zero.
inline Tensor softmax(const Tensor& x, int axis, bool causal = false) {
  const AxisSplit sp = split_axis(x.shape(), axis);
  if (causal && (sp.inner != 1 || x.rank() < 2)) throw DimensionError("causal softmax needs the last axis of a rank>=2 tensor");
  const std::size_t rows = causal ? x.dim(-2) : 1;
  Tensor out(x.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const std::size_t limit = causal ? (o % rows) + 1 : sp.len;
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, x[base + j * sp.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < limit; ++j) {
        const double e = std::exp(x[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < limit; ++j) out[base + j * sp.inner] /= z;
    }
  }
  return out;
}

// ---------------------------------------------------------------- layer norm

struct LayerNormCache {
  Tensor out;
  Tensor xhat;
  std::vector<double> rstd;
};

inline LayerNormCache layer_norm_cached(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm feature size " + std::to_string(d) + " vs gamma " + shape_str(gamma.shape()) +
                         ", beta " + shape_str(beta.shape()));
  }
  if (!(eps > 0.0)) throw ParameterError("layer_norm eps must be > 0");
  LayerNormCache c{Tensor(x.shape()), Tensor(x.shape()), {}};
  const std::size_t rows = x.numel() / d;
  c.rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    c.rstd[r] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mu) * rstd;
      c.xhat[r * d + j] = xh;
      c.out[r * d + j] = gamma[j] * xh + beta[j];
    }
  }
  return c;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6) {
  return layer_norm_cached(x, gamma, beta, eps).out;
}

// ---------------------------------------------------------------- dropout

/// Inverted-dropout multipliers: 0 with probability p, else 1/(1-p).
inline std::vector<double> dropout_mask(std::size_t n, double p_drop, std::uint64_t seed) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw ParameterError("dropout probability must lie in [0,1)");
  std::vector<double> mask(n, 1.0);
  if (p_drop == 0.0) return mask;
  const double keep = 1.0 / (1.0 - p_drop);
  Rng rng(seed);
  for (auto& m : mask) m = rng.uniform01() < p_drop ? 0.0 : keep;
  return mask;
}

inline Tensor dropout(const Tensor& x, double p_drop, std::uint64_t seed, bool training) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw ParameterError("dropout probability must lie in [0,1)");
  if (!training || p_drop == 0.0) return x;
  const auto mask = dropout_mask(x.numel(), p_drop, seed);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = x[i] * mask[i];
  return out;
}

}  // namespace w2n::kernels
