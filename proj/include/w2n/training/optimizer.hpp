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
#include <cstdint>
#include <map>
#include <string>

#include "w2n/model/params.hpp"

namespace w2n {

/// Warmup-then-inverse-sqrt learning rate:
/// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).
inline double lr_schedule(std::uint64_t step_num, std::uint64_t d_model, std::uint64_t warmup_steps) {
  if (step_num == 0 || d_model == 0 || warmup_steps == 0) {
    throw ParameterError("lr_schedule needs step_num, d_model and warmup_steps >= 1");
  }
  const double step = static_cast<double>(step_num);
  const double gamma = std::min(std::pow(step, -0.5), step * std::pow(static_cast<double>(warmup_steps), -1.5));
  return std::pow(static_cast<double>(d_model), -0.5) * gamma;
}

struct OptimizerState {
  std::uint64_t step_num = 0;  // number of updates applied so far
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  std::uint64_t warmup_steps = 4000;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// Bias-corrected Adam update of every parameter present in `grads`.
/// Parameters without a gradient entry are left alone and their moments untouched.
inline void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lrate) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("gradient for unknown parameter " + name);
    if (it->second.shape() != g.shape()) throw DimensionError("gradient shape mismatch for " + name);
    if (!g.all_finite()) throw TrainingError("non-finite gradient in parameter " + name);
  }
  ++state.step_num;
  const double t = static_cast<double>(state.step_num);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mi, m_new] = state.m.try_emplace(name, g.shape());
    auto [vi, v_new] = state.v.try_emplace(name, g.shape());
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lrate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace w2n
