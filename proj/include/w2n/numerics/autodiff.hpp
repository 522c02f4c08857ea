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

// Reverse-mode differentiation over a linear tape.
//
// A Tape records every primitive applied to its Vars in call order. backward()
// walks that record once, newest first, and each backward rule adds into the
// gradients of its inputs, so a Var used by several consumers sums their
// contributions. A Tape belongs to one thread and one step; Tensors copied out
// of it are ordinary values.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "w2n/numerics/kernels.hpp"

namespace w2n {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), std::nullopt, requires_grad, {}});
    return Var{this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Append an op result. The backward rule is kept only if some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool rg = false;
    for (const Var& v : inputs) {
      check_owner(v);
      rg = rg || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::nullopt, rg, rg ? std::move(backward) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(Var v) const {
    check_owner(v);
    return nodes_[v.id].value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of a leaf after backward(); zeros if nothing flowed into it.
  Tensor grad(Var v) const {
    check_owner(v);
    const Node& n = nodes_[v.id];
    return n.grad ? *n.grad : Tensor(n.value.shape());
  }

  /// Mutable gradient buffer of v, allocated on first use. Used by backward rules.
  Tensor& grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (!n.grad) n.grad = Tensor(n.value.shape());
    return *n.grad;
  }

  void backward(Var root) {
    check_owner(root);
    if (nodes_[root.id].value.numel() != 1) {
      throw ContractError("backward() needs a scalar root, got " + shape_str(nodes_[root.id].value.shape()));
    }
    for (auto& n : nodes_) n.grad.reset();
    grad_buffer(root)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || !n.grad) continue;
      // Copy: the rule may allocate other nodes' buffers but never this one.
      const Tensor g = *n.grad;
      n.backward(*this, g);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline void accumulate(Tape& t, Var v, const Tensor& g) {
  if (!t.requires_grad(v)) return;
  auto& buf = t.grad_buffer(v).vec();
  const auto& src = g.vec();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += src[i];
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    detail::accumulate(tp, a, g);
    detail::accumulate(tp, b, g);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    detail::accumulate(tp, a, g);
    if (!tp.requires_grad(b)) return;
    auto& buf = tp.grad_buffer(b);
    for (std::size_t i = 0; i < g.numel(); ++i) buf[i] -= g[i];
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& av2 = tp.value(a);
    const Tensor& bv2 = tp.value(b);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

inline Var square(Var a) { return mul(a, a); }

inline Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (auto& v : out.data()) v *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) {
    auto& ga = tp.grad_buffer(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
  });
}

/// x[..., n] + bias[n]
inline Var add_bias(Var x, Var bias) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  const std::size_t n = xv.dim(-1);
  if (bv.numel() != n) {
    throw DimensionError("bias " + shape_str(bv.shape()) + " does not match last axis of " + shape_str(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i % n];
  return t.record(std::move(out), {x, bias}, [x, bias, n](Tape& tp, const Tensor& g) {
    detail::accumulate(tp, x, g);
    if (!tp.requires_grad(bias)) return;
    auto& gb = tp.grad_buffer(bias);
    for (std::size_t i = 0; i < g.numel(); ++i) gb[i % n] += g[i];
  });
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  Tensor out = t.value(x);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    auto& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

// ---------------------------------------------------------------- reductions

inline Var sum(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return t.record(Tensor::scalar(s), {x}, [x](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x);
    for (auto& v : gx.data()) v += g[0];
  });
}

inline Var mean(Var x) {
  const double n = static_cast<double>(x.tape->value(x).numel());
  return scale(sum(x), 1.0 / n);
}

// ---------------------------------------------------------------- layout

inline Var reshape(Var x, Shape shape) {
  Tape& t = *x.tape;
  Tensor out = t.value(x).reshaped(std::move(shape));
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
  });
}

inline Var permute(Var x, std::vector<std::size_t> axes) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  auto map = std::make_shared<std::vector<std::size_t>>(kernels::permutation_map(xv.shape(), axes));
  Tensor out(kernels::permuted_shape(xv.shape(), axes));
  for (std::size_t o = 0; o < map->size(); ++o) out[o] = xv[(*map)[o]];
  return t.record(std::move(out), {x}, [x, map](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t o = 0; o < map->size(); ++o) gx[(*map)[o]] += g[o];
  });
}

inline Var transpose_last2(Var x) { return permute(x, kernels::swap_last2_axes(x.tape->value(x).rank())); }

// ---------------------------------------------------------------- matmul

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  auto plan = std::make_shared<kernels::MatmulPlan>(kernels::plan_matmul(t.value(a).shape(), t.value(b).shape()));
  Tensor out(plan->out_shape);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const std::size_t oc = plan->m * plan->n;
  for (std::size_t bi = 0; bi < plan->a_off.size(); ++bi) {
    kernels::gemm_acc(av.data().data() + plan->a_off[bi], bv.data().data() + plan->b_off[bi],
                      out.data().data() + bi * oc, plan->m, plan->p, plan->n);
  }
  return t.record(std::move(out), {a, b}, [a, b, plan](Tape& tp, const Tensor& g) {
    const Tensor& av2 = tp.value(a);
    const Tensor& bv2 = tp.value(b);
    const std::size_t oc2 = plan->m * plan->n;
    const bool ga_on = tp.requires_grad(a), gb_on = tp.requires_grad(b);
    double* ga = ga_on ? tp.grad_buffer(a).data().data() : nullptr;
    double* gb = gb_on ? tp.grad_buffer(b).data().data() : nullptr;
    for (std::size_t bi = 0; bi < plan->a_off.size(); ++bi) {
      const double* gc = g.data().data() + bi * oc2;
      if (ga_on) kernels::gemm_acc_nt(gc, bv2.data().data() + plan->b_off[bi], ga + plan->a_off[bi], plan->m, plan->p, plan->n);
      if (gb_on) kernels::gemm_acc_tn(av2.data().data() + plan->a_off[bi], gc, gb + plan->b_off[bi], plan->m, plan->p, plan->n);
    }
  });
}

// ---------------------------------------------------------------- softmax

inline Var softmax(Var x, int axis, bool causal = false) {
  Tape& t = *x.tape;
  const kernels::AxisSplit sp = kernels::split_axis(t.value(x).shape(), axis);
  Tensor out = kernels::softmax(t.value(x), axis, causal);
  const std::size_t out_id = t.size();  // id the recorded node will get
  return t.record(std::move(out), {x}, [x, sp, out_id](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(Var{&tp, out_id});
    auto& gx = tp.grad_buffer(x);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < sp.len; ++j) dot += g[base + j * sp.inner] * y[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t i = base + j * sp.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

// ---------------------------------------------------------------- layer norm

inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6) {
  Tape& t = *x.tape;
  auto cache = std::make_shared<kernels::LayerNormCache>(
      kernels::layer_norm_cached(t.value(x), t.value(gamma), t.value(beta), eps));
  Tensor out = cache->out;
  return t.record(std::move(out), {x, gamma, beta}, [x, gamma, beta, cache](Tape& tp, const Tensor& g) {
    const Tensor& gv = tp.value(gamma);
    const std::size_t d = gv.numel();
    const std::size_t rows = g.numel() / d;
    const bool gx_on = tp.requires_grad(x), gg_on = tp.requires_grad(gamma), gb_on = tp.requires_grad(beta);
    Tensor* gx = gx_on ? &tp.grad_buffer(x) : nullptr;
    Tensor* gg = gg_on ? &tp.grad_buffer(gamma) : nullptr;
    Tensor* gb = gb_on ? &tp.grad_buffer(beta) : nullptr;
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t i = r * d + j;
        if (gg) (*gg)[j] += g[i] * cache->xhat[i];
        if (gb) (*gb)[j] += g[i];
        dxhat[j] = g[i] * gv[j];
        m1 += dxhat[j];
        m2 += dxhat[j] * cache->xhat[i];
      }
      if (!gx) continue;
      m1 /= static_cast<double>(d);
      m2 /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t i = r * d + j;
        (*gx)[i] += cache->rstd[r] * (dxhat[j] - m1 - cache->xhat[i] * m2);
      }
    }
  });
}

// ---------------------------------------------------------------- dropout

inline Var dropout(Var x, double p_drop, std::uint64_t seed, bool training) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) throw ParameterError("dropout probability must lie in [0,1)");
  if (!training || p_drop == 0.0) return x;
  Tape& t = *x.tape;
  auto mask = std::make_shared<std::vector<double>>(kernels::dropout_mask(t.value(x).numel(), p_drop, seed));
  Tensor out = t.value(x);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= (*mask)[i];
  return t.record(std::move(out), {x}, [x, mask](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

}  // namespace w2n
