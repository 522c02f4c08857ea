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

#include <cmath>
#include <vector>

#include "w2n/corpus/example.hpp"
#include "w2n/model/config.hpp"

namespace w2n::testing {

// Chunks whose target is a fixed smooth map of the source and whose labels
// depend on the source frame, so the mapping is learnable.
inline std::vector<TrainingExample> synthetic_chunks(std::size_t n, const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Tensor mix({cfg.d_in, cfg.d_out});
  for (auto& v : mix.data()) v = rng.normal() / std::sqrt(static_cast<double>(cfg.d_in));
  std::vector<TrainingExample> out;
  for (std::size_t c = 0; c < n; ++c) {
    TrainingExample ex{Tensor({cfg.k, cfg.d_in}), Tensor({cfg.k, cfg.d_out}), {}, "utt" + std::to_string(c / 4),
                       static_cast<std::uint32_t>(c % 4)};
    for (auto& v : ex.src.data()) v = rng.normal();
    for (std::size_t i = 0; i < cfg.k; ++i) {
      for (std::size_t j = 0; j < cfg.d_out; ++j) {
        double acc = 0.0;
        for (std::size_t q = 0; q < cfg.d_in; ++q) acc += ex.src[i * cfg.d_in + q] * mix[q * cfg.d_out + j];
        ex.tgt[i * cfg.d_out + j] = std::tanh(acc);
      }
      if (cfg.has_aux()) ex.labels.push_back(static_cast<std::int32_t>(rng.below(cfg.triphone_vocab)));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Small joint model used by the overfit checks.
inline ModelConfig overfit_config() {
  ModelConfig c;
  c.d_in = c.d_out = 24;
  c.k = 3;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.n_aux_layers = 1;
  c.tap_layer = 1;
  c.n_heads = 4;
  c.triphone_vocab = 8;
  return c;
}

}  // namespace w2n::testing
