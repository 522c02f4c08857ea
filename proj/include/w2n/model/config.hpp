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

#include <cstddef>
#include <string>

#include "json.hpp"

#include "w2n/errors.hpp"

namespace w2n {

/// Architecture of one conversion model. The model width equals d_in; there
/// is no embedding and no positional encoding, every chunk has exactly k frames.
struct ModelConfig {
  std::size_t d_in = 80;
  std::size_t d_out = 80;
  std::size_t k = 3;
  std::size_t n_enc_layers = 6;
  std::size_t n_dec_layers = 6;
  std::size_t n_aux_layers = 3;
  std::size_t tap_layer = 3;
  bool tap_after_norm = true;
  std::size_t n_heads = 8;
  std::size_t d_ff = 0;  // 0 selects 4 * d_in
  double p_drop = 0.1;
  std::size_t triphone_vocab = 0;  // 0 disables the auxiliary decoder
  double ln_eps = 1e-6;

  std::size_t d_model() const noexcept { return d_in; }
  std::size_t ff_dim() const noexcept { return d_ff == 0 ? 4 * d_in : d_ff; }
  std::size_t d_head() const noexcept { return d_in / n_heads; }
  bool has_aux() const noexcept { return triphone_vocab > 0; }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    need(d_in >= 1 && d_out >= 1, "d_in and d_out must be >= 1");
    need(k >= 1, "k must be >= 1");
    need(n_enc_layers >= 1 && n_dec_layers >= 1 && n_aux_layers >= 1, "layer counts must be >= 1");
    need(n_heads >= 1 && d_in % n_heads == 0,
         "d_in (" + std::to_string(d_in) + ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    need(tap_layer >= 1 && tap_layer <= n_enc_layers, "tap_layer must lie in [1, n_enc_layers]");
    need(p_drop >= 0.0 && p_drop < 1.0, "p_drop must lie in [0,1)");
    need(ln_eps > 0.0, "ln_eps must be > 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_in", c.d_in},
                     {"d_out", c.d_out},
                     {"k", c.k},
                     {"n_enc_layers", c.n_enc_layers},
                     {"n_dec_layers", c.n_dec_layers},
                     {"n_aux_layers", c.n_aux_layers},
                     {"tap_layer", c.tap_layer},
                     {"tap_after_norm", c.tap_after_norm},
                     {"n_heads", c.n_heads},
                     {"d_ff", c.d_ff},
                     {"p_drop", c.p_drop},
                     {"triphone_vocab", c.triphone_vocab},
                     {"ln_eps", c.ln_eps}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.d_in = j.value("d_in", d.d_in);
  c.d_out = j.value("d_out", d.d_out);
  c.k = j.value("k", d.k);
  c.n_enc_layers = j.value("n_enc_layers", d.n_enc_layers);
  c.n_dec_layers = j.value("n_dec_layers", d.n_dec_layers);
  c.n_aux_layers = j.value("n_aux_layers", d.n_aux_layers);
  c.tap_layer = j.value("tap_layer", d.tap_layer);
  c.tap_after_norm = j.value("tap_after_norm", d.tap_after_norm);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.p_drop = j.value("p_drop", d.p_drop);
  c.triphone_vocab = j.value("triphone_vocab", d.triphone_vocab);
  c.ln_eps = j.value("ln_eps", d.ln_eps);
}

}  // namespace w2n
