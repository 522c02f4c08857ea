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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "w2n/numerics/autodiff.hpp"

namespace w2n {

/// Scalar function of several tensors, expressed on a tape.
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

namespace detail {

inline double eval_scalar(const MultiScalarFn& f, const std::vector<Tensor>& xs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(xs.size());
  for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
  const Var y = f(tape, vars);
  const Tensor& yv = tape.value(y);
  if (yv.numel() != 1) throw ContractError("grad_check needs a scalar-valued function, got " + shape_str(yv.shape()));
  return yv[0];
}

}  // namespace detail

/// Compares reverse-mode gradients with central differences for every
/// coordinate of every input. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
inline GradCheckResult grad_check_all(const MultiScalarFn& f, std::vector<Tensor> xs, double h = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : xs) vars.push_back(tape.leaf(x, true));
  const Var y = f(tape, vars);
  if (tape.value(y).numel() != 1) {
    throw ContractError("grad_check needs a scalar-valued function, got " + shape_str(tape.value(y).shape()));
  }
  tape.backward(y);
  GradCheckResult res;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Tensor analytic = tape.grad(vars[t]);
    for (std::size_t i = 0; i < xs[t].numel(); ++i) {
      const double orig = xs[t][i];
      xs[t][i] = orig + h;
      const double fp = detail::eval_scalar(f, xs);
      xs[t][i] = orig - h;
      const double fm = detail::eval_scalar(f, xs);
      xs[t][i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = t;
        res.worst_index = i;
      }
      ++res.coordinates;
    }
  }
  return res;
}

inline double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5) {
  MultiScalarFn g = [&f](Tape& t, std::span<const Var> v) { return f(t, v[0]); };
  return grad_check_all(g, {x}, h).max_rel_error;
}

}  // namespace w2n
