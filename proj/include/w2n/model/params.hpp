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
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "w2n/model/config.hpp"
#include "w2n/numerics/autodiff.hpp"

namespace w2n {

/// Named learned weights, ordered by name. Every name and shape is a pure
/// function of the ModelConfig (see param_shapes()).
using ModelParams = std::map<std::string, Tensor>;
using ParamShapes = std::map<std::string, Shape>;

inline std::string layer_prefix(std::string_view stack, std::size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s.%02zu", static_cast<int>(stack.size()), stack.data(), layer);
  return buf;
}

inline ParamShapes param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model(), ff = cfg.ff_dim();
  ParamShapes s;
  auto attention = [&](const std::string& p) {
    for (const char* w : {".wq", ".wk", ".wv", ".wo"}) s[p + w] = {d, d};
  };
  auto norm = [&](const std::string& p) {
    s[p + ".g"] = {d};
    s[p + ".b"] = {d};
  };
  auto feed_forward = [&](const std::string& p) {
    s[p + ".w1"] = {d, ff};
    s[p + ".b1"] = {ff};
    s[p + ".w2"] = {ff, d};
    s[p + ".b2"] = {d};
  };
  auto decoder_layer = [&](const std::string& p) {
    attention(p + ".self");
    norm(p + ".ln1");
    attention(p + ".cross");
    norm(p + ".ln2");
    feed_forward(p + ".ff");
    norm(p + ".ln3");
  };
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    const auto p = layer_prefix("enc", l);
    attention(p + ".self");
    norm(p + ".ln1");
    feed_forward(p + ".ff");
    norm(p + ".ln2");
  }
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) decoder_layer(layer_prefix("dec", l));
  s["out.w"] = {d, cfg.d_out};
  s["out.b"] = {cfg.d_out};
  if (cfg.d_out != cfg.d_in) {
    s["in_proj.w"] = {cfg.d_out, d};
    s["in_proj.b"] = {d};
  }
  if (cfg.has_aux()) {
    for (std::size_t l = 0; l < cfg.n_aux_layers; ++l) decoder_layer(layer_prefix("aux", l));
    s["cls.w"] = {d, cfg.triphone_vocab};
    s["cls.b"] = {cfg.triphone_vocab};
  }
  return s;
}

inline std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : param_shapes(cfg)) n += shape_numel(shape);
  return n;
}

/// Encoder layers [0, tap_layer) plus the auxiliary stack: everything the
/// triphone loss can reach.
inline bool is_aux_path_param(const ModelConfig& cfg, const std::string& name) {
  if (name.starts_with("aux.") || name.starts_with("cls.")) return true;
  if (name.starts_with("enc.")) return std::stoul(name.substr(4, 2)) < cfg.tap_layer;
  return false;
}

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

/// Rounds every value to the nearest 32-bit float, the checkpoint precision.
inline void quantize_f32(Tensor& t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

inline void quantize_f32(ModelParams& p) {
  for (auto& [name, t] : p) quantize_f32(t);
}

/// Glorot-uniform matrices, zero biases, unit layer-norm gains. Each tensor
/// draws from its own stream keyed by (seed, name), so adding or removing the
/// auxiliary stack leaves the shared weights untouched.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p;
  for (const auto& [name, shape] : param_shapes(cfg)) {
    Tensor t(shape);
    const bool is_gain = name.ends_with(".g");
    if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      Rng rng(mix_seed(seed, name_hash(name)));
      for (auto& v : t.data()) v = rng.uniform(-limit, limit);
    } else if (is_gain) {
      for (auto& v : t.data()) v = 1.0;
    }
    quantize_f32(t);
    p.emplace(name, std::move(t));
  }
  return p;
}

/// Throws unless params has exactly the names and shapes cfg implies.
inline void check_params(const ModelConfig& cfg, const ModelParams& params) {
  const ParamShapes want = param_shapes(cfg);
  if (want.size() != params.size()) {
    throw DimensionError("expected " + std::to_string(want.size()) + " parameter tensors, got " +
                         std::to_string(params.size()));
  }
  for (const auto& [name, shape] : want) {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("missing parameter " + name);
    if (it->second.shape() != shape) {
      throw DimensionError("parameter " + name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                           shape_str(shape));
    }
  }
}

/// Parameters placed on a tape for one forward pass.
class BoundParams {
 public:
  /// `trainable` restricts which leaves get gradients; null means all of them.
  BoundParams(Tape& tape, const ModelParams& params, bool requires_grad,
              const std::set<std::string>* trainable = nullptr)
      : tape_(&tape) {
    for (const auto& [name, t] : params) {
      const bool rg = requires_grad && (!trainable || trainable->count(name));
      vars_.emplace(name, tape.leaf(t, rg));
    }
  }

  /// Binds `params` as constants except names in `overrides`, which use the given Vars.
  BoundParams(Tape& tape, const ModelParams& params, const std::map<std::string, Var>& overrides) : tape_(&tape) {
    for (const auto& [name, t] : params) {
      auto it = overrides.find(name);
      vars_.emplace(name, it != overrides.end() ? it->second : tape.leaf(t, false));
    }
  }

  Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return vars_.count(name) != 0; }
  Tape& tape() const { return *tape_; }
  const std::map<std::string, Var>& vars() const noexcept { return vars_; }

  ModelParams grads() const {
    ModelParams g;
    for (const auto& [name, v] : vars_) g.emplace(name, tape_->grad(v));
    return g;
  }

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

}  // namespace w2n
