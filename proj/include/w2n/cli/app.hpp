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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "w2n/cli/commands.hpp"

namespace w2n::cli {

namespace detail {

struct CommonFlags {
  std::string preset;
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
  std::string out;
};

inline void add_common(CLI::App* sub, CommonFlags& f, bool out_required) {
  sub->add_option("--preset", f.preset, "W1, W2, W3, V1, V2 or V3 (default: the config file's, else W2)");
  sub->add_option("--config", f.config, "JSON config file layered over the preset")->check(CLI::ExistingFile);
  sub->add_option("--set", f.overrides, "dotted.key=value override, repeatable");
  sub->add_option("--seed", f.seed, "seed for training order, dropout and Monte Carlo sampling");
  sub->add_flag("--deterministic,!--no-deterministic", f.deterministic,
                "byte-identical outputs for identical inputs (default on)");
  auto* out = sub->add_option("--out", f.out, "output directory (convert: output file or directory)");
  if (out_required) out->required();
}

inline RunConfig resolve(const CommonFlags& f) {
  ConfigSources src;
  src.preset = f.preset;
  src.config_file = f.config;
  src.overrides = f.overrides;
  src.seed = f.seed;
  src.deterministic = f.deterministic;
  return resolve_config(src);
}

}  // namespace detail

/// The `w2n` command line. Returns the process exit code; diagnostics go to err.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Whispered/natural speech feature conversion: data preparation, training, conversion, evaluation"};
  app.set_version_flag("--version", std::string("w2n ") + kVersion);
  app.require_subcommand(1);
  detail::CommonFlags common;

  PrepareOptions prep;
  auto* c_prep = app.add_subcommand("prepare", "align, featurize and chunk a manifest of utterance pairs into shards");
  c_prep->add_option("--manifest", prep.manifest, "TAB-separated: id, whisper, natural[, labels[, transcript]]")
      ->required()
      ->check(CLI::ExistingFile);
  c_prep->add_option("--vocab", prep.vocab, "fixed triphone inventory; unknown labels reject a pair")
      ->check(CLI::ExistingFile);
  detail::add_common(c_prep, common, true);

  TrainOptions tr;
  std::string data_dir;
  auto* c_train = app.add_subcommand("train", "train a conversion model on prepared shards");
  auto* c_pre = app.add_subcommand("pretrain-aux", "train only the encoder layers below the tap and the auxiliary decoder");
  for (auto* c : {c_train, c_pre}) {
    c->add_option("--data", tr.data_dir, "directory written by prepare")->required()->check(CLI::ExistingDirectory);
    c->add_option("--init", tr.init, "checkpoint to start from (fresh optimizer)")->check(CLI::ExistingFile);
    c->add_option("--resume", tr.resume, "checkpoint to continue, optimizer state included")->check(CLI::ExistingFile);
    c->add_option("--log-every", tr.log_every, "steps between progress lines (0 = quiet)");
    detail::add_common(c, common, true);
  }

  ConvertOptions conv;
  auto* c_conv = app.add_subcommand("convert", "run a trained model over wav or feature files");
  c_conv->add_option("--checkpoint", conv.checkpoint, "trained model")->required()->check(CLI::ExistingFile);
  c_conv->add_option("--input", conv.input, "wav / .wfea file, or a directory of them")->required()->check(CLI::ExistingPath);
  detail::add_common(c_conv, common, true);

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "formant/F0 GMM divergence report, plus WER/BLEU given transcripts");
  c_eval->add_option("--ref", ev.ref, "reference wav / mfcc80 file or directory")->required()->check(CLI::ExistingPath);
  c_eval->add_option("--hyp", ev.hyp, "hypothesis wav / mfcc80 file or directory")->required()->check(CLI::ExistingPath);
  c_eval->add_option("--ref-text", ev.ref_text, "reference transcripts, id<TAB>text")->check(CLI::ExistingFile);
  c_eval->add_option("--hyp-text", ev.hyp_text, "ASR transcripts of the hypothesis, id<TAB>text")->check(CLI::ExistingFile);
  detail::add_common(c_eval, common, true);

  fs::path m_ref, m_hyp;
  auto* c_met = app.add_subcommand("metrics", "WER and BLEU of transcript files");
  c_met->add_option("--ref-text", m_ref, "reference transcripts")->required()->check(CLI::ExistingFile);
  c_met->add_option("--hyp-text", m_hyp, "hypothesis transcripts")->required()->check(CLI::ExistingFile);
  detail::add_common(c_met, common, false);

  bool inject_fault = false;
  auto* c_self = app.add_subcommand("selfcheck", "run the built-in numerical oracles");
  c_self->add_flag("--inject-fault", inject_fault)->group("");  // test hook, hidden from help
  detail::add_common(c_self, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    const RunConfig cfg = detail::resolve(common);
    if (c_prep->parsed()) {
      prep.out_dir = common.out;
      cmd_prepare(prep, cfg, out);
    } else if (c_train->parsed() || c_pre->parsed()) {
      tr.out_dir = common.out;
      tr.pretrain = c_pre->parsed();
      cmd_train(tr, cfg, out);
    } else if (c_conv->parsed()) {
      conv.output = common.out;
      cmd_convert(conv, cfg, out);
    } else if (c_eval->parsed()) {
      ev.out_dir = common.out;
      cmd_eval(ev, cfg, out);
    } else if (c_met->parsed()) {
      const auto s = score_transcripts(m_ref, m_hyp);
      out << scores_json(s).dump(2) << "\n";
      if (!common.out.empty()) {
        write_json(fs::path(common.out) / "metrics.json", scores_json(s));
        write_run_record(fs::path(common.out) / "run.json", "metrics", cfg, {m_ref, m_hyp});
      }
    } else if (c_self->parsed()) {
      bool ok = true;
      for (const auto& c : run_selfcheck(inject_fault)) {
        out << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.pass;
      }
      return static_cast<int>(ok ? ExitCode::kOk : ExitCode::kNumerical);
    }
  } catch (const Error& e) {
    err << "w2n: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "w2n: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    err << "w2n: internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  }
  return static_cast<int>(ExitCode::kOk);
}

}  // namespace w2n::cli
