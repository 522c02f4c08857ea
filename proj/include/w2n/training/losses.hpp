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
#include <memory>
#include <vector>

#include "w2n/numerics/autodiff.hpp"

namespace w2n {

/// Per-frame mean squared errors at or below this floor contribute no
/// gradient, so the derivative of the square root stays finite at an exact match.
inline constexpr double kRmseFloor = 1e-12;

struct LossBreakdown {
  double l1_rmse = 0.0;
  double l2_xent = 0.0;
  double total = 0.0;
};

/// Sum over the k frames of the per-frame RMS error, averaged over the batch.
/// `target` is a constant; only y_hat receives a gradient.
inline Var rmse_loss(Var y_hat, const Tensor& target) {
  Tape& t = *y_hat.tape;
  const Tensor& y = t.value(y_hat);
  if (y.shape() != target.shape() || y.rank() != 3) {
    throw DimensionError("rmse_loss shapes " + shape_str(y.shape()) + " vs " + shape_str(target.shape()));
  }
  const std::size_t B = y.dim(0), k = y.dim(1), n = y.dim(2);
  auto rms = std::make_shared<std::vector<double>>(B * k);
  auto active = std::make_shared<std::vector<bool>>(B * k);
  double loss = 0.0;
  for (std::size_t f = 0; f < B * k; ++f) {
    double mse = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = target[f * n + j] - y[f * n + j];
      mse += diff * diff;
    }
    mse /= static_cast<double>(n);
    (*active)[f] = mse > kRmseFloor;
    (*rms)[f] = std::sqrt(mse);
    loss += (*rms)[f];
  }
  loss /= static_cast<double>(B);
  auto tgt = std::make_shared<Tensor>(target);
  return t.record(Tensor::scalar(loss), {y_hat}, [y_hat, tgt, rms, active, B, k, n](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(y_hat);
    auto& gy = tp.grad_buffer(y_hat);
    for (std::size_t f = 0; f < B * k; ++f) {
      if (!(*active)[f]) continue;
      const double c = g[0] / (static_cast<double>(B) * static_cast<double>(n) * (*rms)[f]);
      for (std::size_t j = 0; j < n; ++j) gy[f * n + j] += c * (yv[f * n + j] - (*tgt)[f * n + j]);
    }
  });
}

/// Cross-entropy of softmax(logits) against integer labels, summed over the
/// k frames and averaged over the batch. labels are row-major [B, k].
inline Var triphone_xent_loss(Var logits, const std::vector<std::int32_t>& labels) {
  Tape& t = *logits.tape;
  const Tensor& z = t.value(logits);
  if (z.rank() != 3) throw DimensionError("triphone_xent_loss expects (B,k,P) logits, got " + shape_str(z.shape()));
  const std::size_t B = z.dim(0), k = z.dim(1), P = z.dim(2);
  if (labels.size() != B * k) {
    throw DimensionError("expected " + std::to_string(B * k) + " labels, got " + std::to_string(labels.size()));
  }
  auto probs = std::make_shared<Tensor>(z.shape());
  double loss = 0.0;
  for (std::size_t f = 0; f < B * k; ++f) {
    const std::int32_t lab = labels[f];
    if (lab < 0 || static_cast<std::size_t>(lab) >= P) {
      throw DataError("label " + std::to_string(lab) + " at frame " + std::to_string(f % k) + " of batch item " +
                      std::to_string(f / k) + " outside [0," + std::to_string(P) + ")");
    }
    const double* row = z.data().data() + f * P;
    const double mx = *std::max_element(row, row + P);
    double sum = 0.0;
    for (std::size_t j = 0; j < P; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < P; ++j) (*probs)[f * P + j] = std::exp(row[j] - lse);
    loss += lse - row[lab];
  }
  loss /= static_cast<double>(B);
  auto labs = std::make_shared<std::vector<std::int32_t>>(labels);
  return t.record(Tensor::scalar(loss), {logits}, [logits, probs, labs, B, P](Tape& tp, const Tensor& g) {
    auto& gz = tp.grad_buffer(logits);
    const double c = g[0] / static_cast<double>(B);
    for (std::size_t f = 0; f < labs->size(); ++f) {
      for (std::size_t j = 0; j < P; ++j) gz[f * P + j] += c * (*probs)[f * P + j];
      gz[f * P + static_cast<std::size_t>((*labs)[f])] -= c;
    }
  });
}

}  // namespace w2n
