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

#include <functional>
#include <string>
#include <vector>

#include "w2n/model/params.hpp"
#include "w2n/numerics/grad_check.hpp"

namespace w2n {

using ParamLossFn = std::function<Var(const BoundParams&)>;

/// Finite-difference check of a scalar loss with respect to model parameters.
/// `select` picks which tensors are perturbed (all when empty).
inline GradCheckResult grad_check_params(const ModelParams& params, const ParamLossFn& loss,
                                         const std::function<bool(const std::string&)>& select = {},
                                         double h = 1e-5) {
  std::vector<std::string> names;
  std::vector<Tensor> xs;
  for (const auto& [name, t] : params) {
    if (!select || select(name)) {
      names.push_back(name);
      xs.push_back(t);
    }
  }
  MultiScalarFn f = [&](Tape& tape, std::span<const Var> vars) {
    std::map<std::string, Var> over;
    for (std::size_t i = 0; i < names.size(); ++i) over.emplace(names[i], vars[i]);
    return loss(BoundParams(tape, params, over));
  };
  return grad_check_all(f, std::move(xs), h);
}

}  // namespace w2n
