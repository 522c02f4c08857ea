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

// Encoder / decoder / auxiliary-decoder stacks over fixed k-frame chunks.
//
// Layout conventions: activations are [B, k, d] with d = d_in; heads are
// split to [B, h, k, d_head]. Every sub-layer is post-norm:
// LayerNorm(x + Dropout(sublayer(x))).

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "w2n/model/params.hpp"

namespace w2n {

/// Per-pass state: dropout switch and seed stream, plus an optional sink
/// collecting every attention weight tensor for inspection.
struct ForwardContext {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  std::uint64_t dropout_calls = 0;
  std::vector<Tensor>* attention_trace = nullptr;

  std::uint64_t next_seed() { return mix_seed(dropout_seed, dropout_calls++); }
};

struct AttentionOutput {
  Var context;  // [B, h, k_q, d_head]
  Var weights;  // [B, h, k_q, k_kv]
};

/// softmax(Q K^T / sqrt(d_k)) V over the last two axes.
inline AttentionOutput scaled_dot_product_attention(Var q, Var k, Var v, bool causal = false) {
  Tape& t = *q.tape;
  const Shape& qs = t.value(q).shape();
  const Shape& ks = t.value(k).shape();
  const Shape& vs = t.value(v).shape();
  if (qs.size() < 2 || ks != vs || qs.size() != ks.size() || qs.back() != ks.back()) {
    throw DimensionError("attention shapes Q" + shape_str(qs) + " K" + shape_str(ks) + " V" + shape_str(vs));
  }
  const double d_k = static_cast<double>(qs.back());
  Var scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(d_k));
  Var w = softmax(scores, -1, causal);
  return {matmul(w, v), w};
}

namespace detail {

inline void check_activation(const Tensor& x, std::size_t k, std::size_t d, const char* what) {
  if (x.rank() != 3 || x.dim(1) != k || x.dim(2) != d) {
    throw DimensionError(std::string(what) + " expected (B," + std::to_string(k) + "," + std::to_string(d) +
                         "), got " + shape_str(x.shape()));
  }
}

inline Var linear(const BoundParams& p, const std::string& w, Var x) { return matmul(x, p[w]); }

inline Var linear_bias(const BoundParams& p, const std::string& w, const std::string& b, Var x) {
  return add_bias(matmul(x, p[w]), p[b]);
}

}  // namespace detail

/// Multi-head attention with projections <prefix>.wq/.wk/.wv/.wo.
inline Var multi_head_attention(const BoundParams& p, const std::string& prefix, Var query_in, Var memory,
                                std::size_t n_heads, bool causal, ForwardContext& ctx) {
  Tape& t = p.tape();
  const Shape qs = t.value(query_in).shape();
  const Shape ms = t.value(memory).shape();
  const std::size_t B = qs[0], kq = qs[1], d = qs[2], km = ms[1];
  const std::size_t dh = d / n_heads;
  auto split = [&](Var x, std::size_t len) { return permute(reshape(x, {B, len, n_heads, dh}), {0, 2, 1, 3}); };
  Var q = split(detail::linear(p, prefix + ".wq", query_in), kq);
  Var k = split(detail::linear(p, prefix + ".wk", memory), km);
  Var v = split(detail::linear(p, prefix + ".wv", memory), km);
  AttentionOutput att = scaled_dot_product_attention(q, k, v, causal);
  if (ctx.attention_trace) ctx.attention_trace->push_back(t.value(att.weights));
  Var merged = reshape(permute(att.context, {0, 2, 1, 3}), {B, kq, d});
  return detail::linear(p, prefix + ".wo", merged);
}

inline Var feed_forward(const BoundParams& p, const std::string& prefix, Var x) {
  Var h = relu(detail::linear_bias(p, prefix + ".w1", prefix + ".b1", x));
  return detail::linear_bias(p, prefix + ".w2", prefix + ".b2", h);
}

/// LayerNorm(x + Dropout(y)) with <norm>.g / <norm>.b.
inline Var residual_norm(const BoundParams& p, const ModelConfig& cfg, const std::string& norm, Var x, Var y,
                         ForwardContext& ctx) {
  Var r = add(x, dropout(y, cfg.p_drop, ctx.next_seed(), ctx.training));
  return layer_norm(r, p[norm + ".g"], p[norm + ".b"], cfg.ln_eps);
}

struct EncoderOutput {
  Var z;      // output of the last encoder layer
  Var h_tap;  // residual stream after layer tap_layer
};

/// Runs encoder layers [0, n_layers); n_layers defaults to the full stack.
inline EncoderOutput encoder_forward(const BoundParams& p, const ModelConfig& cfg, Var x, ForwardContext& ctx,
                                     std::optional<std::size_t> n_layers = std::nullopt) {
  detail::check_activation(p.tape().value(x), cfg.k, cfg.d_in, "encoder input");
  const std::size_t stop = n_layers.value_or(cfg.n_enc_layers);
  Var h = x;
  std::optional<Var> tap;
  for (std::size_t l = 0; l < stop; ++l) {
    const auto pre = layer_prefix("enc", l);
    Var a = residual_norm(p, cfg, pre + ".ln1", h, multi_head_attention(p, pre + ".self", h, h, cfg.n_heads, false, ctx),
                          ctx);
    Var f = feed_forward(p, pre + ".ff", a);
    if (l + 1 == cfg.tap_layer && cfg.tap_after_norm) {
      h = residual_norm(p, cfg, pre + ".ln2", a, f, ctx);
      tap = h;
    } else if (l + 1 == cfg.tap_layer) {
      Var r = add(a, dropout(f, cfg.p_drop, ctx.next_seed(), ctx.training));
      tap = r;
      h = layer_norm(r, p[pre + ".ln2.g"], p[pre + ".ln2.b"], cfg.ln_eps);
    } else {
      h = residual_norm(p, cfg, pre + ".ln2", a, f, ctx);
    }
  }
  return {h, tap.value_or(h)};
}

/// Decoder-style stack: causal-or-not self attention, cross attention over
/// `memory`, feed-forward; each wrapped residual + norm.
inline Var decoder_stack(const BoundParams& p, const ModelConfig& cfg, const char* stack, std::size_t n_layers,
                         Var input, Var memory, bool causal, ForwardContext& ctx) {
  Var h = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto pre = layer_prefix(stack, l);
    Var s = residual_norm(p, cfg, pre + ".ln1", h,
                          multi_head_attention(p, pre + ".self", h, h, cfg.n_heads, causal, ctx), ctx);
    Var c = residual_norm(p, cfg, pre + ".ln2", s,
                          multi_head_attention(p, pre + ".cross", s, memory, cfg.n_heads, false, ctx), ctx);
    h = residual_norm(p, cfg, pre + ".ln3", c, feed_forward(p, pre + ".ff", c), ctx);
  }
  return h;
}

/// Main decoder. dec_in is already in d_in space; output has no nonlinearity.
inline Var decoder_forward(const BoundParams& p, const ModelConfig& cfg, Var dec_in, Var z, ForwardContext& ctx) {
  detail::check_activation(p.tape().value(dec_in), cfg.k, cfg.d_in, "decoder input");
  detail::check_activation(p.tape().value(z), cfg.k, cfg.d_in, "encoder memory");
  Var h = decoder_stack(p, cfg, "dec", cfg.n_dec_layers, dec_in, z, true, ctx);
  return detail::linear_bias(p, "out.w", "out.b", h);
}

/// Triphone logits [B, k, P]; h_tap is both the input sequence and the memory.
inline Var aux_decoder_forward(const BoundParams& p, const ModelConfig& cfg, Var h_tap, ForwardContext& ctx) {
  if (!cfg.has_aux()) throw ConfigError("auxiliary decoder requested with triphone_vocab = 0");
  detail::check_activation(p.tape().value(h_tap), cfg.k, cfg.d_in, "auxiliary decoder input");
  Var h = decoder_stack(p, cfg, "aux", cfg.n_aux_layers, h_tap, h_tap, false, ctx);
  return detail::linear_bias(p, "cls.w", "cls.b", h);
}

/// Maps previous output frames [B,k,d_out] into decoder space [B,k,d_in].
inline Var project_decoder_input(const BoundParams& p, const ModelConfig& cfg, Var prev_frames) {
  detail::check_activation(p.tape().value(prev_frames), cfg.k, cfg.d_out, "previous output frames");
  if (cfg.d_out == cfg.d_in) return prev_frames;
  return detail::linear_bias(p, "in_proj.w", "in_proj.b", prev_frames);
}

/// Teacher-forcing input: a zero start frame followed by frames 0..k-2.
inline Tensor shift_right(const Tensor& targets) {
  if (targets.rank() != 3) throw DimensionError("shift_right expects (B,k,d), got " + shape_str(targets.shape()));
  const std::size_t B = targets.dim(0), k = targets.dim(1), d = targets.dim(2);
  Tensor out(targets.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 1; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j) out[(b * k + i) * d + j] = targets[(b * k + i - 1) * d + j];
  return out;
}

struct ModelOutput {
  Var y_hat;                 // [B, k, d_out]
  std::optional<Var> logits;  // [B, k, P] when the auxiliary decoder exists
};

/// Full network. prev_frames holds the teacher-forced previous target frames
/// in d_out space (shift_right of the targets during training).
inline ModelOutput model_forward(const BoundParams& p, const ModelConfig& cfg, Var x, Var prev_frames,
                                 ForwardContext& ctx) {
  EncoderOutput enc = encoder_forward(p, cfg, x, ctx);
  Var dec_in = project_decoder_input(p, cfg, prev_frames);
  ModelOutput out{decoder_forward(p, cfg, dec_in, enc.z, ctx), std::nullopt};
  if (cfg.has_aux()) out.logits = aux_decoder_forward(p, cfg, enc.h_tap, ctx);
  return out;
}

/// Autoregressive inference with dropout off. Decoding starts from a zero
/// frame; the frame produced at position t becomes decoder input t+1.
inline Tensor model_infer(const ModelParams& params, const ModelConfig& cfg, const Tensor& x) {
  detail::check_activation(x, cfg.k, cfg.d_in, "model input");
  Tape tape;
  BoundParams p(tape, params, false);
  ForwardContext ctx;
  Var z = encoder_forward(p, cfg, tape.constant(x), ctx).z;
  const std::size_t B = x.dim(0), k = cfg.k, d = cfg.d_out;
  Tensor prev({B, k, d});
  Tensor y;
  for (std::size_t t = 0; t < k; ++t) {
    Var dec_in = project_decoder_input(p, cfg, tape.constant(prev));
    y = tape.value(decoder_forward(p, cfg, dec_in, z, ctx));
    if (t + 1 < k) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < d; ++j) prev[(b * k + t + 1) * d + j] = y[(b * k + t) * d + j];
    }
  }
  return y;
}

}  // namespace w2n
