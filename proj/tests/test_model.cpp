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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "w2n/model/checkpoint.hpp"
#include "w2n/model/param_grad_check.hpp"
#include "w2n/model/transformer.hpp"
#include "w2n/numerics/grad_check.hpp"

namespace w2n {
namespace {

ModelConfig tiny_config(std::size_t d_in = 8, std::size_t d_out = 8, std::size_t P = 5) {
  ModelConfig c;
  c.d_in = d_in;
  c.d_out = d_out;
  c.k = 3;
  c.n_heads = 2;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.n_aux_layers = 1;
  c.tap_layer = 1;
  c.triphone_vocab = P;
  return c;
}

// Unquantized random weights (including gains/biases) for gradient checks.
ModelParams random_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p;
  std::uint64_t s = seed;
  for (const auto& [name, shape] : param_shapes(cfg)) {
    Tensor t = random_uniform(shape, -0.5, 0.5, ++s);
    if (name.ends_with(".g")) {
      for (auto& v : t.data()) v += 1.0;
    }
    p.emplace(name, std::move(t));
  }
  return p;
}

// ------------------------------------------------------------------ attention

TEST(Attention, SaturatesToSelectedRow) {
  Tape t;
  // K rows are one-hot; Q equals K row 1, scaled up.
  Tensor K({1, 1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor Q({1, 1, 3, 3}, {0, 100, 0, 0, 100, 0, 0, 100, 0});
  Tensor V = random_uniform({1, 1, 3, 3}, -1, 1, 4);
  auto out = scaled_dot_product_attention(t.constant(Q), t.constant(K), t.constant(V));
  const Tensor& c = t.value(out.context);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c.at({0, 0, i, j}), V.at({0, 0, 1, j}), 1e-12);
}

TEST(Attention, ZeroQueryAveragesValues) {
  Tape t;
  Tensor Q({2, 2, 3, 4});
  Tensor K = random_uniform({2, 2, 3, 4}, -1, 1, 1);
  Tensor V = random_uniform({2, 2, 3, 4}, -1, 1, 2);
  auto out = scaled_dot_product_attention(t.constant(Q), t.constant(K), t.constant(V));
  const Tensor& w = t.value(out.weights);
  for (double v : w.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor& c = t.value(out.context);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t j = 0; j < 4; ++j) {
        const double mean = (V.at({b, h, 0, j}) + V.at({b, h, 1, j}) + V.at({b, h, 2, j})) / 3.0;
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(c.at({b, h, i, j}), mean, 1e-12);
      }
}

TEST(Attention, MatchesDirectFormula) {
  Tape t;
  Tensor Q = random_uniform({1, 1, 3, 4}, -1, 1, 11);
  Tensor K = random_uniform({1, 1, 3, 4}, -1, 1, 12);
  Tensor V = random_uniform({1, 1, 3, 4}, -1, 1, 13);
  auto out = scaled_dot_product_attention(t.constant(Q), t.constant(K), t.constant(V));
  const Tensor& c = t.value(out.context);
  for (std::size_t i = 0; i < 3; ++i) {
    long double w[3], z = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      long double s = 0;
      for (std::size_t d = 0; d < 4; ++d) s += static_cast<long double>(Q[i * 4 + d]) * K[j * 4 + d];
      w[j] = std::exp(s / 2.0L);
      z += w[j];
    }
    for (std::size_t d = 0; d < 4; ++d) {
      long double v = 0;
      for (std::size_t j = 0; j < 3; ++j) v += w[j] / z * V[j * 4 + d];
      EXPECT_NEAR(c[i * 4 + d], static_cast<double>(v), 1e-10);
    }
  }
  EXPECT_THROW(scaled_dot_product_attention(t.constant(Q), t.constant(random_uniform({1, 1, 2, 4}, 0, 1, 1)),
                                            t.constant(V)),
               DimensionError);
}

// ------------------------------------------------------------------ encoder

TEST(Encoder, ZeroWeightsReduceToNormalizedInput) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 1);
  for (auto& [name, t] : params) {
    if (!name.ends_with(".g")) t = Tensor(t.shape());
  }
  Tape tape;
  BoundParams p(tape, params, false);
  ForwardContext ctx;
  Tensor x = random_uniform({2, 3, 8}, -2, 2, 5);
  auto enc = encoder_forward(p, cfg, tape.constant(x), ctx);
  const Tensor& z = tape.value(enc.z);
  ASSERT_EQ(z.shape(), x.shape());
  Tensor ones({8}, 1.0), zeros({8}, 0.0);
  Tensor want = kernels::layer_norm(x, ones, zeros, cfg.ln_eps);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_NEAR(z[i], want[i], 1e-5);
}

TEST(Encoder, PermutationEquivariantOverFrames) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 2);
  Tensor x = random_uniform({2, 3, 8}, -1, 1, 6);
  const std::size_t perm[3] = {2, 0, 1};
  Tensor xp(x.shape());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 8; ++j) xp.at({b, i, j}) = x.at({b, perm[i], j});
  auto run = [&](const Tensor& in) {
    Tape t;
    BoundParams p(t, params, false);
    ForwardContext ctx;
    return t.value(encoder_forward(p, cfg, t.constant(in), ctx).z);
  };
  Tensor z = run(x), zp = run(xp);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(zp.at({b, i, j}), z.at({b, perm[i], j}), 1e-12);
}

TEST(Encoder, SmokeTapDiffersFromOutput) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 3);
  Tape t;
  BoundParams p(t, params, false);
  ForwardContext ctx;
  auto enc = encoder_forward(p, cfg, t.constant(random_uniform({2, 3, 8}, -1, 1, 7)), ctx);
  EXPECT_TRUE(t.value(enc.z).all_finite());
  EXPECT_TRUE(t.value(enc.h_tap).all_finite());
  EXPECT_NE(t.value(enc.z), t.value(enc.h_tap));

  EXPECT_THROW(encoder_forward(p, cfg, t.constant(Tensor({2, 3, 6})), ctx), DimensionError);
}

TEST(Encoder, TapBeforeNormIsSelectable) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 3);
  Tensor x = random_uniform({2, 3, 8}, -1, 1, 7);
  auto tap = [&](bool after) {
    ModelConfig c = cfg;
    c.tap_after_norm = after;
    Tape t;
    BoundParams p(t, params, false);
    ForwardContext ctx;
    auto enc = encoder_forward(p, c, t.constant(x), ctx);
    return std::pair{t.value(enc.h_tap), t.value(enc.z)};
  };
  auto [after, z1] = tap(true);
  auto [before, z2] = tap(false);
  EXPECT_EQ(z1, z2);
  EXPECT_NE(after, before);
  // Post-norm tap has unit-variance rows; the raw residual sum generally not.
  Tensor ones({8}, 1.0), zeros({8}, 0.0);
  Tensor renorm = kernels::layer_norm(before, ones, zeros, cfg.ln_eps);
  for (std::size_t i = 0; i < after.numel(); ++i) EXPECT_NEAR(renorm[i], after[i], 1e-12);
}

// ------------------------------------------------------------------ decoder

TEST(Decoder, OutputShapesForEveryFeatureKind) {
  for (auto [d_in, d_out] : std::vector<std::pair<std::size_t, std::size_t>>{{80, 80}, {24, 24}, {24, 1}, {24, 513}}) {
    ModelConfig cfg;
    cfg.d_in = d_in;
    cfg.d_out = d_out;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.tap_layer = 1;
    ModelParams params = init_params(cfg, 9);
    Tape t;
    BoundParams p(t, params, false);
    ForwardContext ctx;
    auto out = model_forward(p, cfg, t.constant(random_uniform({2, 3, d_in}, -1, 1, 1)),
                             t.constant(Tensor({2, 3, d_out})), ctx);
    EXPECT_EQ(t.value(out.y_hat).shape(), (Shape{2, 3, d_out}));
    EXPECT_FALSE(out.logits.has_value());
  }
}

TEST(Decoder, ZeroOutputWeightsGiveBias) {
  ModelConfig cfg = tiny_config(8, 4, 0);
  ModelParams params = init_params(cfg, 4);
  params["out.w"] = Tensor(params["out.w"].shape());
  params["out.b"] = Tensor({4}, {0.25, -1, 3, 0.5});
  Tensor y = model_infer(params, cfg, random_uniform({2, 3, 8}, -1, 1, 3));
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y[i], params["out.b"][i % 4]);
}

TEST(Decoder, GradientWrtDecoderInputMatchesFiniteDifferences) {
  ModelConfig cfg = tiny_config();
  ModelParams params = random_params(cfg, 10);
  Tensor z = random_uniform({2, 3, 8}, -1, 1, 20);
  Tensor dec_in = random_uniform({2, 3, 8}, -1, 1, 21);
  auto f = [&](Tape& t, Var x) {
    BoundParams p(t, params, false);
    ForwardContext ctx;
    return mean(decoder_forward(p, cfg, x, t.constant(z), ctx));
  };
  EXPECT_LT(grad_check(f, dec_in), 1e-4);
}

TEST(Decoder, CausalMaskBlocksFutureFrames) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 11);
  Tensor z = random_uniform({1, 3, 8}, -1, 1, 1);
  Tensor a = random_uniform({1, 3, 8}, -1, 1, 2);
  Tensor b = a;
  for (std::size_t j = 0; j < 8; ++j) b.at({0, 2, j}) += 0.7;
  auto run = [&](const Tensor& in) {
    Tape t;
    BoundParams p(t, params, false);
    ForwardContext ctx;
    return t.value(decoder_forward(p, cfg, t.constant(in), t.constant(z), ctx));
  };
  Tensor ya = run(a), yb = run(b);
  for (std::size_t i = 0; i < 2 * 8; ++i) EXPECT_EQ(ya[i], yb[i]);  // frames 0, 1 untouched
  bool last_changed = false;
  for (std::size_t i = 16; i < 24; ++i) last_changed |= ya[i] != yb[i];
  EXPECT_TRUE(last_changed);

  // Not permutation-equivariant, unlike the encoder.
  Tensor ap(a.shape());
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) ap.at({0, i, j}) = a.at({0, perm[i], j});
  Tensor yp = run(ap);
  double diff = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) diff += std::abs(yp.at({0, i, j}) - ya.at({0, perm[i], j}));
  EXPECT_GT(diff, 1e-6);
}

// ------------------------------------------------------------------ auxiliary decoder

TEST(AuxDecoder, LogitShapeAndZeroClassifier) {
  ModelConfig cfg = tiny_config(8, 8, 100);
  ModelParams params = init_params(cfg, 12);
  Tape t;
  BoundParams p(t, params, false);
  ForwardContext ctx;
  Tensor h = random_uniform({4, 3, 8}, -1, 1, 3);
  Var logits = aux_decoder_forward(p, cfg, t.constant(h), ctx);
  EXPECT_EQ(t.value(logits).shape(), (Shape{4, 3, 100}));

  params["cls.w"] = Tensor(params["cls.w"].shape());
  Tape t2;
  BoundParams p2(t2, params, false);
  Tensor probs = kernels::softmax(t2.value(aux_decoder_forward(p2, cfg, t2.constant(h), ctx)), -1);
  for (double v : probs.data()) EXPECT_NEAR(v, 0.01, 1e-15);

  ModelConfig no_aux = tiny_config(8, 8, 0);
  EXPECT_THROW(aux_decoder_forward(p, no_aux, t.constant(h), ctx), ConfigError);
}

TEST(AuxDecoder, GradientCheckThroughAuxPath) {
  ModelConfig cfg = tiny_config();
  ModelParams params = random_params(cfg, 13);
  Tensor x = random_uniform({2, 3, 8}, -1, 1, 30);
  Tensor w = random_uniform({2, 3, 5}, -1, 1, 31);
  auto loss = [&](const BoundParams& p, Var input) {
    ForwardContext ctx;
    Var h = encoder_forward(p, cfg, input, ctx).h_tap;
    return sum(mul(aux_decoder_forward(p, cfg, h, ctx), p.tape().constant(w)));
  };
  const auto r = grad_check_params(
      params, [&](const BoundParams& p) { return loss(p, p.tape().constant(x)); },
      [&](const std::string& name) { return is_aux_path_param(cfg, name); });
  EXPECT_GT(r.coordinates, 1000u);
  EXPECT_LT(r.max_rel_error, 1e-4);
  // And with respect to the input frames.
  EXPECT_LT(grad_check([&](Tape& t, Var in) { return loss(BoundParams(t, params, false), in); }, x), 1e-4);
}

// ------------------------------------------------------------------ full model

TEST(Model, AttentionRowsSumToOneEverywhere) {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 14);
  std::vector<Tensor> trace;
  Tape t;
  BoundParams p(t, params, false);
  ForwardContext ctx{true, 5, 0, &trace};
  model_forward(p, cfg, t.constant(random_uniform({3, 3, 8}, -3, 3, 1)),
                t.constant(random_uniform({3, 3, 8}, -3, 3, 2)), ctx);
  // enc 2 + dec 2*2 + aux 1*2
  ASSERT_EQ(trace.size(), 8u);
  for (const Tensor& w : trace) {
    ASSERT_EQ(w.rank(), 4u);
    const std::size_t len = w.dim(-1);
    for (std::size_t r = 0; r < w.numel() / len; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < len; ++j) {
        EXPECT_GE(w[r * len + j], 0.0);
        s += w[r * len + j];
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Model, InferenceIsDeterministicAndHandlesSingleFrame) {
  ModelConfig cfg = tiny_config(8, 4, 5);
  ModelParams params = init_params(cfg, 15);
  Tensor x = random_uniform({2, 3, 8}, -1, 1, 1);
  EXPECT_EQ(model_infer(params, cfg, x), model_infer(params, cfg, x));

  ModelConfig one = cfg;
  one.k = 1;
  ModelParams p1 = init_params(one, 15);
  Tensor x1 = random_uniform({2, 1, 8}, -1, 1, 1);
  Tensor y1 = model_infer(p1, one, x1);
  EXPECT_EQ(y1.shape(), (Shape{2, 1, 4}));
  // One step from a zero start frame equals a teacher-forced pass.
  Tape t;
  BoundParams p(t, p1, false);
  ForwardContext ctx;
  auto out = model_forward(p, one, t.constant(x1), t.constant(Tensor({2, 1, 4})), ctx);
  EXPECT_EQ(t.value(out.y_hat), y1);
}

TEST(Model, InferenceMatchesTeacherForcingOnOwnOutputs) {
  ModelConfig cfg = tiny_config(8, 8, 0);
  ModelParams params = init_params(cfg, 16);
  Tensor x = random_uniform({2, 3, 8}, -1, 1, 2);
  Tensor y = model_infer(params, cfg, x);
  Tape t;
  BoundParams p(t, params, false);
  ForwardContext ctx;
  auto out = model_forward(p, cfg, t.constant(x), t.constant(shift_right(y)), ctx);
  const Tensor& tf = t.value(out.y_hat);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(tf[i], y[i], 1e-12);
}

TEST(Model, ParamShapesArePureFunctionOfConfig) {
  ModelConfig cfg = tiny_config(8, 3, 5);
  EXPECT_EQ(param_shapes(cfg), param_shapes(cfg));
  EXPECT_EQ(param_count(cfg), param_count(cfg));
  EXPECT_TRUE(param_shapes(cfg).count("in_proj.w"));
  EXPECT_FALSE(param_shapes(tiny_config(8, 8, 5)).count("in_proj.w"));
  EXPECT_FALSE(param_shapes(tiny_config(8, 8, 0)).count("cls.w"));
  ModelParams params = init_params(cfg, 1);
  EXPECT_NO_THROW(check_params(cfg, params));
  params.erase("out.b");
  EXPECT_THROW(check_params(cfg, params), DimensionError);

  // Shared weights do not depend on whether the auxiliary stack exists.
  ModelParams with_aux = init_params(tiny_config(8, 8, 5), 3);
  ModelParams without = init_params(tiny_config(8, 8, 0), 3);
  for (const auto& [name, t] : without) EXPECT_EQ(with_aux.at(name), t) << name;
}

TEST(Model, ConfigValidation) {
  ModelConfig c = tiny_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.tap_layer = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.k = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  ModelConfig defaults;
  EXPECT_NO_THROW(defaults.validate());
  EXPECT_EQ(defaults.ff_dim(), 320u);
  defaults.d_in = defaults.d_out = 24;
  EXPECT_NO_THROW(defaults.validate());
  EXPECT_EQ(defaults.ff_dim(), 96u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = std::filesystem::temp_directory_path() / "w2n_model_test";
  std::filesystem::create_directories(dir);
  Checkpoint ck{tiny_config(8, 3, 5), init_params(tiny_config(8, 3, 5), 17), {}, {{"step", 12}}};
  ck.state["adam.m/out.w"] = random_uniform({8, 3}, -1, 1, 4);  // f64 state
  save_checkpoint(dir / "a.wlt", ck);
  Checkpoint back = load_checkpoint(dir / "a.wlt");
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.state, ck.state);
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ck));

  Tensor x = random_uniform({2, 3, 8}, -1, 1, 5);
  EXPECT_EQ(model_infer(back.params, back.config, x), model_infer(ck.params, ck.config, x));

  // Corruption is detected.
  auto bytes = encode_checkpoint(ck);
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(bytes, "corrupt"), FormatError);
  bytes = encode_checkpoint(ck);
  bytes.resize(bytes.size() - 9);
  EXPECT_THROW(decode_checkpoint(bytes, "truncated"), FormatError);
  bytes = encode_checkpoint(ck);
  bytes[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bytes, "magic"), FormatError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace w2n
