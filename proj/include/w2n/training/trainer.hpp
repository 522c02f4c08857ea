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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "w2n/corpus/example.hpp"
#include "w2n/model/checkpoint.hpp"
#include "w2n/model/transformer.hpp"
#include "w2n/training/losses.hpp"
#include "w2n/training/optimizer.hpp"

namespace w2n {

struct TrainRunConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 80;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // steps between periodic checkpoints; 0 writes only the final one
  bool deterministic = true;         // false stamps checkpoints with the save time
  std::uint64_t warmup_steps = 4000;
  double lr_scale = 1.0;    // multiplies the scheduled rate
  double aux_weight = 1.0;  // weight on the triphone term of the total loss
  std::size_t max_steps = 0;  // 0 runs the full epochs x batches
  std::filesystem::path out_dir;  // empty keeps everything in memory

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
    if (!(lr_scale > 0.0) || !std::isfinite(lr_scale)) throw ConfigError("lr_scale must be a positive finite number");
    if (!(aux_weight >= 0.0) || !std::isfinite(aux_weight)) throw ConfigError("aux_weight must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const TrainRunConfig& r) {
  j = nlohmann::json{{"batch_size", r.batch_size},     {"epochs", r.epochs},
                     {"seed", r.seed},                 {"checkpoint_every", r.checkpoint_every},
                     {"deterministic", r.deterministic}, {"warmup_steps", r.warmup_steps},
                     {"lr_scale", r.lr_scale},         {"aux_weight", r.aux_weight},
                     {"max_steps", r.max_steps}};
}

inline void from_json(const nlohmann::json& j, TrainRunConfig& r) {
  TrainRunConfig d;
  r.batch_size = j.value("batch_size", d.batch_size);
  r.epochs = j.value("epochs", d.epochs);
  r.seed = j.value("seed", d.seed);
  r.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  r.deterministic = j.value("deterministic", d.deterministic);
  r.warmup_steps = j.value("warmup_steps", d.warmup_steps);
  r.lr_scale = j.value("lr_scale", d.lr_scale);
  r.aux_weight = j.value("aux_weight", d.aux_weight);
  r.max_steps = j.value("max_steps", d.max_steps);
}

struct StepRecord {
  std::uint64_t step = 0;
  double lrate = 0.0;
  LossBreakdown loss;
  double wall_time = 0.0;  // seconds since the run started
};

inline nlohmann::json to_json_line(const StepRecord& r) {
  return {{"step", r.step},           {"lrate", r.lrate}, {"l1", r.loss.l1_rmse},
          {"l2", r.loss.l2_xent},     {"total", r.loss.total}, {"wall_time", r.wall_time}};
}

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
};

using StepCallback = std::function<void(const StepRecord&)>;

struct Batch {
  Tensor src;  // [B,k,d_in]
  Tensor tgt;  // [B,k,d_out]
  std::vector<std::int32_t> labels;  // [B*k], empty when unlabeled
};

inline Batch make_batch(std::span<const TrainingExample> corpus, std::span<const std::size_t> idx,
                        const ModelConfig& cfg, bool with_labels) {
  const std::size_t B = idx.size(), k = cfg.k;
  Batch b{Tensor({B, k, cfg.d_in}), Tensor({B, k, cfg.d_out}), {}};
  for (std::size_t i = 0; i < B; ++i) {
    const TrainingExample& ex = corpus[idx[i]];
    std::copy(ex.src.data().begin(), ex.src.data().end(), b.src.data().begin() + i * k * cfg.d_in);
    std::copy(ex.tgt.data().begin(), ex.tgt.data().end(), b.tgt.data().begin() + i * k * cfg.d_out);
    if (with_labels) b.labels.insert(b.labels.end(), ex.labels.begin(), ex.labels.end());
  }
  return b;
}

/// Throws unless every example fits the config (and carries k labels when needed).
inline void check_corpus(std::span<const TrainingExample> corpus, const ModelConfig& cfg, bool need_labels) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    const std::string where = "example " + std::to_string(i) + " (" + ex.utterance_id + "#" +
                              std::to_string(ex.chunk_index) + ")";
    if (ex.src.shape() != Shape{cfg.k, cfg.d_in}) {
      throw DimensionError(where + ": source shape " + shape_str(ex.src.shape()) + ", model expects " +
                           shape_str({cfg.k, cfg.d_in}));
    }
    if (ex.tgt.shape() != Shape{cfg.k, cfg.d_out}) {
      throw DimensionError(where + ": target shape " + shape_str(ex.tgt.shape()) + ", model expects " +
                           shape_str({cfg.k, cfg.d_out}));
    }
    if (!need_labels) continue;
    if (ex.labels.size() != cfg.k) throw DataError(where + ": auxiliary decoder enabled but example has no labels");
    for (auto l : ex.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= cfg.triphone_vocab) {
        throw DataError(where + ": label " + std::to_string(l) + " outside vocabulary of " +
                        std::to_string(cfg.triphone_vocab));
      }
    }
  }
}

/// Seeded permutation of [0, n) for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

/// Total training loss L1 + aux_weight * L2 (L2 only with the auxiliary
/// decoder) for one batch under teacher forcing.
inline Var joint_loss(const BoundParams& p, const ModelConfig& cfg, const Batch& batch, double aux_weight,
                      ForwardContext& ctx, LossBreakdown* parts = nullptr) {
  Tape& tape = p.tape();
  ModelOutput m = model_forward(p, cfg, tape.constant(batch.src), tape.constant(shift_right(batch.tgt)), ctx);
  Var total = rmse_loss(m.y_hat, batch.tgt);
  LossBreakdown lb;
  lb.l1_rmse = tape.value(total).item();
  if (m.logits) {
    Var l2 = triphone_xent_loss(*m.logits, batch.labels);
    lb.l2_xent = tape.value(l2).item();
    total = add(total, aux_weight == 1.0 ? l2 : scale(l2, aux_weight));
  }
  lb.total = tape.value(total).item();
  if (parts) *parts = lb;
  return total;
}

/// Triphone loss through the encoder prefix and auxiliary stack only.
inline Var aux_loss(const BoundParams& p, const ModelConfig& cfg, const Batch& batch, ForwardContext& ctx,
                    LossBreakdown* parts = nullptr) {
  Tape& tape = p.tape();
  EncoderOutput enc = encoder_forward(p, cfg, tape.constant(batch.src), ctx, cfg.tap_layer);
  Var l2 = triphone_xent_loss(aux_decoder_forward(p, cfg, enc.h_tap, ctx), batch.labels);
  if (parts) *parts = {0.0, tape.value(l2).item(), tape.value(l2).item()};
  return l2;
}

namespace detail {

enum class Objective { kFull, kAuxOnly };

struct StepOutcome {
  LossBreakdown loss;
  ModelParams grads;
};

/// Forward + backward for one batch. Only names in `trainable` get gradients.
inline StepOutcome loss_and_grads(const ModelParams& params, const ModelConfig& cfg, const Batch& batch,
                                  Objective obj, double aux_weight, ForwardContext& ctx,
                                  const std::set<std::string>* trainable, bool want_grads) {
  Tape tape;
  BoundParams p(tape, params, want_grads, trainable);
  StepOutcome out;
  Var total = obj == Objective::kAuxOnly ? aux_loss(p, cfg, batch, ctx, &out.loss)
                                         : joint_loss(p, cfg, batch, aux_weight, ctx, &out.loss);
  if (!want_grads) return out;
  tape.backward(total);
  for (const auto& [name, v] : p.vars()) {
    if (!trainable || trainable->count(name)) out.grads.emplace(name, tape.grad(v));
  }
  return out;
}

inline void save_state(const OptimizerState& st, Checkpoint& ck) {
  for (const auto& [name, t] : st.m) ck.state.emplace("m/" + name, t);
  for (const auto& [name, t] : st.v) ck.state.emplace("v/" + name, t);
  ck.meta["optimizer_step"] = st.step_num;
}

inline OptimizerState load_state(const Checkpoint& ck, std::uint64_t warmup) {
  OptimizerState st;
  st.warmup_steps = warmup;
  st.step_num = ck.meta.value("optimizer_step", std::uint64_t{0});
  for (const auto& [name, t] : ck.state) {
    if (name.starts_with("m/")) st.m.emplace(name.substr(2), t);
    else if (name.starts_with("v/")) st.v.emplace(name.substr(2), t);
  }
  return st;
}

inline Checkpoint run_loop(std::span<const TrainingExample> corpus, const ModelConfig& cfg, const TrainRunConfig& run,
                           const Checkpoint* init, bool resume, Objective obj, std::vector<StepRecord>* log,
                           const StepCallback& on_step) {
  cfg.validate();
  run.validate();
  const bool aux_only = obj == Objective::kAuxOnly;
  if (aux_only && !cfg.has_aux()) throw ConfigError("auxiliary pretraining needs triphone_vocab > 0");
  const bool need_labels = cfg.has_aux();
  check_corpus(corpus, cfg, need_labels);

  ModelParams params;
  OptimizerState opt;
  opt.warmup_steps = run.warmup_steps;
  std::uint64_t step = 0;
  if (init) {
    if (!(init->config == cfg)) throw ConfigError("initial checkpoint was trained with a different model config");
    params = init->params;
    if (resume) {
      opt = load_state(*init, run.warmup_steps);
      step = init->meta.value("step", std::uint64_t{0});
    }
  } else {
    params = init_params(cfg, run.seed);
  }

  std::set<std::string> trainable;
  for (const auto& [name, t] : params) {
    if (!aux_only || is_aux_path_param(cfg, name)) trainable.insert(name);
  }

  const std::size_t n = corpus.size();
  const std::size_t B = std::min(run.batch_size, n);
  const std::size_t per_epoch = (n + B - 1) / B;
  std::uint64_t last = static_cast<std::uint64_t>(per_epoch) * run.epochs;
  if (run.max_steps > 0) last = std::min<std::uint64_t>(last, run.max_steps);

  std::ofstream metrics;
  if (!run.out_dir.empty()) {
    std::filesystem::create_directories(run.out_dir);
    metrics.open(run.out_dir / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
    if (!metrics) throw DataError("cannot open metrics log in " + run.out_dir.string());
  }

  auto snapshot = [&](std::uint64_t at) {
    Checkpoint ck{cfg, params, {}, nlohmann::json::object()};
    ck.meta["objective"] = aux_only ? "pretrain_aux" : "train";
    ck.meta["step"] = at;
    ck.meta["seed"] = run.seed;
    ck.meta["warmup_steps"] = run.warmup_steps;
    if (!run.deterministic) {
      ck.meta["saved_at"] = std::chrono::duration_cast<std::chrono::seconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    }
    save_state(opt, ck);
    return ck;
  };

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order;
  std::uint64_t order_epoch = ~std::uint64_t{0};
  const std::size_t d_model = cfg.d_model();
  while (step < last) {
    const std::uint64_t epoch = step / per_epoch;
    const std::size_t slot = static_cast<std::size_t>(step % per_epoch);
    if (epoch != order_epoch) {
      order = epoch_order(n, run.seed, epoch);
      order_epoch = epoch;
    }
    const std::size_t lo = slot * B, hi = std::min(n, lo + B);
    const Batch batch = make_batch(corpus, std::span(order).subspan(lo, hi - lo), cfg, need_labels);

    ++step;
    ForwardContext ctx;
    ctx.training = true;
    ctx.dropout_seed = mix_seed(run.seed, step);
    StepOutcome res = loss_and_grads(params, cfg, batch, obj, run.aux_weight, ctx, &trainable, true);
    if (!std::isfinite(res.loss.total)) {
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(slot) + "): l1=" + std::to_string(res.loss.l1_rmse) +
                          " l2=" + std::to_string(res.loss.l2_xent));
    }
    const double lrate = lr_schedule(opt.step_num + 1, d_model, run.warmup_steps) * run.lr_scale;
    adam_step(params, res.grads, opt, lrate);
    quantize_f32(params);

    StepRecord rec{step, lrate, res.loss,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    if (metrics.is_open()) metrics << to_json_line(rec).dump() << '\n' << std::flush;
    if (log) log->push_back(rec);
    if (on_step) on_step(rec);
    if (!run.out_dir.empty() && run.checkpoint_every > 0 && step % run.checkpoint_every == 0 && step < last) {
      char name[40];
      std::snprintf(name, sizeof name, "ckpt_%08llu.w2n", static_cast<unsigned long long>(step));
      save_checkpoint(run.out_dir / name, snapshot(step));
    }
  }
  Checkpoint final_ck = snapshot(step);
  if (!run.out_dir.empty()) save_checkpoint(run.out_dir / "model.w2n", final_ck);
  return final_ck;
}

}  // namespace detail

/// Joint training: L1 always, plus the weighted triphone term when the
/// auxiliary decoder exists. `init` seeds the parameters (for example a
/// pretrained checkpoint); with `resume` its optimizer state and step count
/// are restored too.
inline TrainResult train(std::span<const TrainingExample> corpus, const ModelConfig& cfg, const TrainRunConfig& run,
                         const Checkpoint* init = nullptr, bool resume = false, const StepCallback& on_step = {}) {
  TrainResult r;
  r.checkpoint = detail::run_loop(corpus, cfg, run, init, resume, detail::Objective::kFull, &r.log, on_step);
  return r;
}

/// Triphone-only optimisation of the encoder below the tap and the auxiliary
/// stack. Targets are ignored; the result loads as an initialization for train.
inline TrainResult pretrain_aux(std::span<const TrainingExample> corpus, const ModelConfig& cfg,
                                const TrainRunConfig& run, const Checkpoint* init = nullptr, bool resume = false,
                                const StepCallback& on_step = {}) {
  if (!cfg.has_aux()) throw ConfigError("auxiliary pretraining needs triphone_vocab > 0");
  TrainResult r;
  r.checkpoint = detail::run_loop(corpus, cfg, run, init, resume, detail::Objective::kAuxOnly, &r.log, on_step);
  return r;
}

/// Dropout-free mean LossBreakdown over the corpus, in fixed order.
inline LossBreakdown evaluate_loss(std::span<const TrainingExample> corpus, const ModelParams& params,
                                   const ModelConfig& cfg, double aux_weight = 1.0, std::size_t batch_size = 128) {
  check_corpus(corpus, cfg, cfg.has_aux());
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  LossBreakdown sum;
  for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
    const std::size_t cnt = std::min(batch_size, idx.size() - lo);
    const Batch b = make_batch(corpus, std::span(idx).subspan(lo, cnt), cfg, cfg.has_aux());
    ForwardContext ctx;
    auto r = detail::loss_and_grads(params, cfg, b, detail::Objective::kFull, aux_weight, ctx, nullptr, false);
    const double w = static_cast<double>(cnt);
    sum.l1_rmse += r.loss.l1_rmse * w;
    sum.l2_xent += r.loss.l2_xent * w;
    sum.total += r.loss.total * w;
  }
  const double n = static_cast<double>(corpus.size());
  return {sum.l1_rmse / n, sum.l2_xent / n, sum.total / n};
}

/// Fraction of frames whose arg-max triphone logit equals the label.
inline double frame_accuracy(std::span<const TrainingExample> corpus, const ModelParams& params,
                             const ModelConfig& cfg) {
  if (!cfg.has_aux()) throw ConfigError("frame accuracy needs the auxiliary decoder");
  check_corpus(corpus, cfg, true);
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Batch b = make_batch(corpus, idx, cfg, true);
  Tape tape;
  BoundParams p(tape, params, false);
  ForwardContext ctx;
  EncoderOutput enc = encoder_forward(p, cfg, tape.constant(b.src), ctx, cfg.tap_layer);
  const Tensor& z = tape.value(aux_decoder_forward(p, cfg, enc.h_tap, ctx));
  const std::size_t P = cfg.triphone_vocab;
  std::size_t hit = 0;
  for (std::size_t f = 0; f < b.labels.size(); ++f) {
    const double* row = z.data().data() + f * P;
    const auto best = static_cast<std::int32_t>(std::max_element(row, row + P) - row);
    hit += best == b.labels[f];
  }
  return static_cast<double>(hit) / static_cast<double>(b.labels.size());
}

}  // namespace w2n
