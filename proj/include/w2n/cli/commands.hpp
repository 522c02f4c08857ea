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
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "w2n/cli/config.hpp"
#include "w2n/corpus/dataset.hpp"
#include "w2n/dsp/resample.hpp"
#include "w2n/evaluation/report.hpp"
#include "w2n/evaluation/text_metrics.hpp"
#include "w2n/model/param_grad_check.hpp"
#include "w2n/training/trainer.hpp"

namespace w2n::cli {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ run records

/// Files a command read, with CRC-32s. Directories contribute every regular
/// file below them in path order.
inline nlohmann::json input_checksums(const std::vector<fs::path>& inputs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& in : inputs) {
    std::vector<fs::path> files;
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    }
    for (const auto& f : files) out.push_back({{"path", f.string()}, {"crc32", io::hex32(io::file_crc32(f))}});
  }
  return out;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const std::string text = j.dump(2) + "\n";
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline void write_run_record(const fs::path& path, const std::string& command, const RunConfig& cfg,
                             const std::vector<fs::path>& inputs) {
  nlohmann::json rec{{"tool", "w2n"},
                     {"version", kVersion},
                     {"command", command},
                     {"config", to_json_tree(cfg)},
                     {"seed", cfg.train.seed},
                     {"deterministic", cfg.train.deterministic},
                     {"inputs", input_checksums(inputs)}};
  if (!cfg.train.deterministic) rec["started_at"] = static_cast<std::int64_t>(std::time(nullptr));
  write_json(path, rec);
}

// ------------------------------------------------------------------ prepare

struct PrepareOptions {
  fs::path manifest;
  fs::path out_dir;
  fs::path vocab;  // optional fixed triphone inventory
};

inline DatasetStats cmd_prepare(const PrepareOptions& opt, const RunConfig& cfg, std::ostream& log) {
  const auto manifest = read_manifest(opt.manifest);
  std::optional<TriphoneVocab> vocab;
  if (!opt.vocab.empty()) vocab = TriphoneVocab::load(opt.vocab);
  const Dataset ds = build_dataset(manifest, cfg.data, vocab, [&](const Rejection& r) {
    log << "rejected " << r.id << ": " << r.reason << "\n";
  });
  save_dataset(ds, opt.out_dir);
  std::vector<fs::path> inputs{opt.manifest};
  if (!opt.vocab.empty()) inputs.push_back(opt.vocab);
  write_run_record(opt.out_dir / "run.json", "prepare", cfg, inputs);
  log << "kept " << ds.stats.pairs_kept << "/" << ds.stats.pairs_total << " pairs, " << ds.stats.chunks
      << " chunks, vocab " << ds.stats.vocab_size << "\n";
  return ds.stats;
}

// ------------------------------------------------------------------ train

struct TrainOptions {
  fs::path data_dir;
  fs::path out_dir;
  fs::path init;    // warm start weights (e.g. from pretrain-aux)
  fs::path resume;  // continue a run, optimizer state included
  bool pretrain = false;
  std::size_t log_every = 100;
};

/// Model shape implied by the run config and the prepared data. Mismatches
/// between the two are configuration errors, caught before any training.
inline ModelConfig model_for_data(const RunConfig& cfg, const Dataset& ds, bool need_aux) {
  if (ds.config.kind != cfg.data.kind) {
    throw ConfigError("preset " + cfg.preset + " expects " + std::string(dsp::kind_name(cfg.data.kind)) +
                      " data, the prepared data is " + std::string(dsp::kind_name(ds.config.kind)));
  }
  if (ds.config.direction != cfg.data.direction) {
    throw ConfigError("preset " + cfg.preset + " converts " + direction_name(cfg.data.direction) +
                      ", the prepared data runs " + direction_name(ds.config.direction));
  }
  ModelConfig m = cfg.model;
  m.d_in = ds.stats.d_in;
  m.d_out = ds.stats.d_out;
  m.k = ds.config.k;
  m.triphone_vocab = 0;
  if (need_aux) {
    if (ds.stats.vocab_size == 0) {
      throw ConfigError("the auxiliary decoder needs triphone labels, the prepared data has none");
    }
    m.triphone_vocab = ds.stats.vocab_size;
  }
  m.validate();
  return m;
}

inline TrainResult cmd_train(const TrainOptions& opt, const RunConfig& cfg, std::ostream& log) {
  if (!opt.init.empty() && !opt.resume.empty()) throw ConfigError("--init and --resume are exclusive");
  const Dataset ds = load_dataset(opt.data_dir);
  const ModelConfig m = model_for_data(cfg, ds, cfg.aux || opt.pretrain);
  TrainRunConfig run = cfg.train;
  run.out_dir = opt.out_dir;
  std::optional<Checkpoint> start;
  if (!opt.resume.empty()) start = load_checkpoint(opt.resume);
  if (!opt.init.empty()) start = load_checkpoint(opt.init);
  const auto progress = [&](const StepRecord& r) {
    if (opt.log_every > 0 && r.step % opt.log_every == 0) {
      log << "step " << r.step << " l1 " << r.loss.l1_rmse << " l2 " << r.loss.l2_xent << "\n";
    }
  };
  const Checkpoint* init = start ? &*start : nullptr;
  TrainResult res = opt.pretrain ? pretrain_aux(ds.examples, m, run, init, !opt.resume.empty(), progress)
                                 : train(ds.examples, m, run, init, !opt.resume.empty(), progress);
  std::vector<fs::path> inputs{opt.data_dir};
  if (init) inputs.push_back(opt.resume.empty() ? opt.init : opt.resume);
  write_run_record(opt.out_dir / "run.json", opt.pretrain ? "pretrain-aux" : "train", cfg, inputs);
  if (!res.log.empty()) {
    const auto& last = res.log.back();
    log << "finished at step " << last.step << ", l1 " << last.loss.l1_rmse << ", l2 " << last.loss.l2_xent
        << "\n";
  }
  return res;
}

// ------------------------------------------------------------------ convert

inline bool is_feature_file(const fs::path& p) { return p.extension() == ".wfea"; }

/// Sorted wav / feature files of a directory, or the single file given.
inline std::vector<fs::path> list_inputs(const fs::path& p) {
  if (!fs::is_directory(p)) {
    if (!fs::exists(p)) throw DataError(p.string() + ": no such file or directory");
    return {p};
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && (detail::is_wav(e.path()) || is_feature_file(e.path()))) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError(p.string() + ": no .wav or .wfea files");
  return out;
}

/// Model input frames for a wav or feature file.
inline dsp::FeatureSequence featurize(const fs::path& p, const ModelConfig& m) {
  dsp::FeatureSequence f;
  if (detail::is_wav(p)) {
    if (m.d_in != 80) {
      throw ParameterError(p.string() + ": wav input yields mfcc80 frames but the checkpoint expects d_in = " +
                           std::to_string(m.d_in));
    }
    dsp::Waveform w = dsp::load_wav(p);
    if (w.sample_rate != 16000.0) w = dsp::resample(w, 16000.0);
    f = dsp::mfcc(w);
    f.source_id = p.stem().string();
  } else {
    f = dsp::read_features(p);
    if (f.dim() != m.d_in) {
      throw ParameterError(p.string() + ": " + std::string(dsp::kind_name(f.kind)) + " frames have d = " +
                           std::to_string(f.dim()) + ", the checkpoint expects d_in = " + std::to_string(m.d_in));
    }
  }
  return f;
}

inline dsp::FeatureKind kind_for_dim(std::size_t d) {
  for (const auto& k : dsp::kKinds) {
    if (k.dim == d) return k.kind;
  }
  throw ParameterError("no feature kind has " + std::to_string(d) + " dimensions");
}

/// Chunks of k frames through the model. The last partial chunk is padded by
/// repeating the final frame and the output is cut back to the input length.
inline dsp::FeatureSequence convert_features(const Checkpoint& ck, const dsp::FeatureSequence& in) {
  const ModelConfig& m = ck.config;
  if (in.dim() != m.d_in) throw ParameterError("input d = " + std::to_string(in.dim()) + ", model d_in = " + std::to_string(m.d_in));
  const std::size_t T = in.length(), k = m.k, chunks = (T + k - 1) / k;
  constexpr std::size_t kBatch = 256;
  dsp::FeatureSequence out;
  out.kind = kind_for_dim(m.d_out);
  out.frame_ms = in.frame_ms;
  out.hop_ms = in.hop_ms;
  out.sample_rate = in.sample_rate;
  out.source_id = in.source_id;
  out.frames = Tensor({T, m.d_out});
  for (std::size_t c0 = 0; c0 < chunks; c0 += kBatch) {
    const std::size_t B = std::min(kBatch, chunks - c0);
    Tensor x({B, k, m.d_in});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t t = std::min((c0 + b) * k + i, T - 1);
        std::copy_n(in.frames.data().begin() + t * m.d_in, m.d_in, x.data().begin() + (b * k + i) * m.d_in);
      }
    }
    const Tensor y = model_infer(ck.params, m, x);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t t = (c0 + b) * k + i;
        if (t >= T) break;
        std::copy_n(y.data().begin() + (b * k + i) * m.d_out, m.d_out, out.frames.data().begin() + t * m.d_out);
      }
    }
  }
  if (!out.frames.all_finite()) throw TrainingError("model produced non-finite frames for " + in.source_id);
  return out;
}

struct ConvertOptions {
  fs::path checkpoint;
  fs::path input;   // file or directory
  fs::path output;  // feature file, or a directory when input is one
};

inline std::vector<fs::path> cmd_convert(const ConvertOptions& opt, const RunConfig& cfg, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const bool many = fs::is_directory(opt.input);
  const auto inputs = list_inputs(opt.input);
  std::vector<fs::path> written;
  for (const auto& in : inputs) {
    const auto out = many ? opt.output / (in.stem().string() + ".wfea") : opt.output;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    dsp::write_features(out, convert_features(ck, featurize(in, ck.config)));
    written.push_back(out);
  }
  const fs::path record = many ? opt.output / "run.json" : fs::path(opt.output.string() + ".run.json");
  write_run_record(record, "convert", cfg, {opt.checkpoint, opt.input});
  log << "converted " << written.size() << " file(s)\n";
  return written;
}

// ------------------------------------------------------------------ eval / metrics

inline FormantTrack analyze_file(const fs::path& p, const AnalysisOptions& opt = {}) {
  if (detail::is_wav(p)) return analyze_waveform(dsp::load_wav(p), opt, p.stem().string());
  const dsp::FeatureSequence f = dsp::read_features(p);
  if (f.kind != dsp::FeatureKind::kMfcc80) {
    throw ParameterError(p.string() + ": formant analysis reads wav or mfcc80 files, got " +
                         std::string(dsp::kind_name(f.kind)));
  }
  return analyze_mfcc(f, opt, p.stem().string());
}

inline std::vector<FormantTrack> analyze_corpus(const fs::path& p) {
  std::vector<FormantTrack> out;
  for (const auto& f : list_inputs(p)) out.push_back(analyze_file(f));
  return out;
}

/// "id<TAB>transcript" per line; '#' lines and blanks are skipped.
inline std::map<std::string, Tokens> read_transcripts(const fs::path& p) {
  const auto bytes = io::read_file(p);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::map<std::string, Tokens> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string id = line.substr(0, tab);
    if (id.empty()) throw DataError(p.string() + ":" + std::to_string(lineno) + ": empty id");
    if (!out.emplace(id, tab == std::string::npos ? Tokens{} : tokenize(line.substr(tab + 1))).second) {
      throw DataError(p.string() + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
  }
  return out;
}

struct TextScores {
  double wer = 0.0;
  double bleu = 0.0;
  std::size_t segments = 0;
};

/// Scores every reference segment; a reference id without a hypothesis is a data error.
inline TextScores score_transcripts(const fs::path& ref_path, const fs::path& hyp_path) {
  const auto ref = read_transcripts(ref_path), hyp = read_transcripts(hyp_path);
  std::vector<Tokens> r, h;
  for (const auto& [id, toks] : ref) {
    auto it = hyp.find(id);
    if (it == hyp.end()) throw DataError(hyp_path.string() + ": no hypothesis for " + id);
    r.push_back(toks);
    h.push_back(it->second);
  }
  if (r.empty()) throw MetricError(ref_path.string() + ": no reference segments");
  return {corpus_wer(r, h), bleu(r, h), r.size()};
}

inline nlohmann::json scores_json(const TextScores& s) {
  return {{"wer", s.wer}, {"bleu", s.bleu}, {"segments", s.segments}};
}

struct EvalOptions {
  fs::path ref;
  fs::path hyp;
  fs::path ref_text;
  fs::path hyp_text;
  fs::path out_dir;
};

struct EvalResult {
  FormantReport report;
  std::optional<TextScores> text;
};

inline EvalResult cmd_eval(const EvalOptions& opt, const RunConfig& cfg, std::ostream& log) {
  if (opt.ref_text.empty() != opt.hyp_text.empty()) throw ConfigError("--ref-text and --hyp-text go together");
  EvalResult res;
  const auto ref = analyze_corpus(opt.ref), hyp = analyze_corpus(opt.hyp);
  res.report = formant_report(ref, hyp, cfg.eval);
  write_report(res.report, opt.out_dir);
  std::vector<fs::path> inputs{opt.ref, opt.hyp};
  if (!opt.ref_text.empty()) {
    res.text = score_transcripts(opt.ref_text, opt.hyp_text);
    write_json(opt.out_dir / "metrics.json", scores_json(*res.text));
    inputs.push_back(opt.ref_text);
    inputs.push_back(opt.hyp_text);
  }
  write_run_record(opt.out_dir / "run.json", "eval", cfg, inputs);
  log << report_tsv(res.report);
  return res;
}

// ------------------------------------------------------------------ selfcheck

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast oracles over every module. `inject_fault` corrupts one reference
/// value so the harness can be seen to fail.
inline std::vector<CheckOutcome> run_selfcheck(bool inject_fault) {
  std::vector<CheckOutcome> out;
  char buf[160];

  {  // schedule closed form
    double worst = 0.0;
    for (std::uint64_t s : {1ULL, 100ULL, 4000ULL, 40000ULL}) {
      const double sd = static_cast<double>(s);
      double want = std::min(1.0 / std::sqrt(sd), sd / (4000.0 * std::sqrt(4000.0))) / std::sqrt(80.0);
      if (inject_fault) want *= 1.0 + 1e-6;
      worst = std::max(worst, std::abs(lr_schedule(s, 80, 4000) - want));
    }
    std::snprintf(buf, sizeof buf, "max abs error %.3g", worst);
    out.push_back({"lr_schedule closed form", worst < 1e-12, buf});
  }
  {  // full-model gradient
    ModelConfig m;
    m.d_in = m.d_out = 8;
    m.k = 3;
    m.n_enc_layers = m.n_dec_layers = 2;
    m.n_aux_layers = 1;
    m.tap_layer = 1;
    m.n_heads = 2;
    m.triphone_vocab = 5;
    const ModelParams params = init_params(m, 1);
    Batch b{random_uniform({2, 3, 8}, -1, 1, 2), random_uniform({2, 3, 8}, -1, 1, 3), {0, 1, 2, 3, 4, 0}};
    const auto r = grad_check_params(params, [&](const BoundParams& p) {
      ForwardContext ctx;
      return joint_loss(p, m, b, 1.0, ctx);
    });
    std::snprintf(buf, sizeof buf, "max relative error %.3g over %zu coordinates", r.max_rel_error, r.coordinates);
    out.push_back({"joint loss gradient", r.max_rel_error < 1e-4, buf});
  }
  {  // attention rows
    Tape t;
    const Tensor q = random_uniform({2, 2, 3, 4}, -3, 3, 6), k = random_uniform({2, 2, 3, 4}, -3, 3, 7);
    const auto att = scaled_dot_product_attention(t.constant(q), t.constant(k), t.constant(k));
    const Tensor& w = t.value(att.weights);
    double worst = 0.0;
    for (std::size_t r = 0; r < w.numel() / 3; ++r) worst = std::max(worst, std::abs(w[3 * r] + w[3 * r + 1] + w[3 * r + 2] - 1.0));
    std::snprintf(buf, sizeof buf, "max row-sum error %.3g", worst);
    out.push_back({"attention rows sum to one", worst < 1e-6, buf});
  }
  {  // KL closed form
    const GmmModel f{{1.0}, {0.0}, {1.0}}, g{{1.0}, {1.0}, {1.0}};
    const KlEstimate kl = gmm_kl_mc(f, g, 200000, 11);
    std::snprintf(buf, sizeof buf, "%.5f vs 0.5 (stderr %.5f)", kl.value, kl.std_error);
    out.push_back({"Gaussian KL", std::abs(kl.value - 0.5) <= 3.0 * kl.std_error, buf});
  }
  {  // formants and pitch
    std::vector<double> x(16000, 0.0);
    for (std::size_t i = 0; i < x.size(); i += 160) x[i] = 1.0;
    for (double hz : {500.0, 1500.0, 2500.0, 3500.0}) {
      const double r = std::exp(-std::numbers::pi * 80.0 / 16000.0), th = 2.0 * std::numbers::pi * hz / 16000.0;
      for (std::size_t n = 0; n < x.size(); ++n) {
        x[n] += (n > 0 ? 2.0 * r * std::cos(th) * x[n - 1] : 0.0) - (n > 1 ? r * r * x[n - 2] : 0.0);
      }
    }
    std::vector<double> frame(400);
    const auto win = detail::hamming(400);
    for (std::size_t i = 0; i < 400; ++i) frame[i] = x[8000 + i] * win[i];
    const auto f = lpc_to_formants(burg_lpc(frame, 18).a, 16000.0);
    bool ok = f.size() == 4;
    std::string d;
    for (std::size_t i = 0; ok && i < 4; ++i) {
      ok = std::abs(f[i].frequency - 500.0 - 1000.0 * static_cast<double>(i)) <= 50.0;
      d += std::to_string(static_cast<int>(std::lround(f[i].frequency))) + " ";
    }
    out.push_back({"four-resonance formants", ok, d + "Hz"});
    std::vector<double> tone(1024);
    for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = std::sin(2.0 * std::numbers::pi * 220.0 * static_cast<double>(i) / 16000.0);
    const auto f0 = estimate_f0(tone, 16000.0);
    std::snprintf(buf, sizeof buf, "%.2f Hz", f0.value_or(0.0));
    out.push_back({"220 Hz pitch", f0 && std::abs(*f0 - 220.0) <= 2.0, buf});
  }
  return out;
}

}  // namespace w2n::cli
