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


// Dataset directory layout:
//
//   dataset.json     config, stats and shard list
//   vocab.txt        triphone vocabulary (when labels are present)
//   shard_NNNN.wfea  TrainingExample shards, utterances in id order

#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "w2n/corpus/align.hpp"
#include "w2n/corpus/chunk.hpp"
#include "w2n/corpus/manifest.hpp"
#include "w2n/corpus/shard.hpp"
#include "w2n/corpus/vocab.hpp"
#include "w2n/dsp/mfcc.hpp"
#include "w2n/dsp/wav.hpp"

namespace w2n {

/// Manifest rows list (whispered, natural). The reverse direction swaps the roles.
enum class Direction { kWhisperToNatural, kNaturalToWhisper };

inline std::string direction_name(Direction d) {
  return d == Direction::kWhisperToNatural ? "whisper_to_natural" : "natural_to_whisper";
}

inline Direction parse_direction(const std::string& s) {
  if (s == "whisper_to_natural") return Direction::kWhisperToNatural;
  if (s == "natural_to_whisper") return Direction::kNaturalToWhisper;
  throw ConfigError("unknown direction '" + s + "' (whisper_to_natural | natural_to_whisper)");
}

struct DatasetConfig {
  dsp::FeatureKind kind = dsp::FeatureKind::kMfcc80;
  Direction direction = Direction::kWhisperToNatural;
  std::size_t k = 3;
  std::size_t shard_size = 4096;  // examples per shard
  AlignOptions align;

  void validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (shard_size == 0) throw ConfigError("shard_size must be >= 1");
    if (kind == dsp::FeatureKind::kSpecDb) throw ConfigError("specdb grids are not a training feature kind");
  }
};

struct Rejection {
  std::string id;
  std::string reason;
};

struct DatasetStats {
  std::size_t pairs_total = 0;
  std::size_t pairs_kept = 0;
  std::size_t chunks = 0;
  std::size_t vocab_size = 0;  // P; 0 when unlabeled
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<Rejection> rejected;
};

struct Dataset {
  DatasetConfig config;
  DatasetStats stats;
  std::vector<TrainingExample> examples;
  TriphoneVocab vocab;
};

using RejectionLog = std::function<void(const Rejection&)>;

namespace detail {

inline bool is_wav(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

/// Aligned feature streams for one manifest row, in manifest (whisper, natural) order.
inline std::pair<dsp::FeatureSequence, dsp::FeatureSequence> pair_features(const UtterancePair& p,
                                                                           const DatasetConfig& cfg) {
  const bool wav_src = is_wav(p.source), wav_tgt = is_wav(p.target);
  if (wav_src != wav_tgt) throw DataError("source and target must both be audio or both be feature files");
  if (wav_src) {
    if (cfg.kind != dsp::FeatureKind::kMfcc80) {
      throw DataError(std::string(dsp::kind_name(cfg.kind)) + " features come from an external vocoder; list feature files");
    }
    const AlignedPair a = align_pair(dsp::load_wav(p.source), dsp::load_wav(p.target), cfg.align);
    return {dsp::mfcc(a.src), dsp::mfcc(a.tgt)};
  }
  auto s = dsp::read_features(p.source), t = dsp::read_features(p.target);
  for (const auto* f : {&s, &t}) {
    if (f->kind != cfg.kind) {
      throw DataError("feature file has kind " + std::string(dsp::kind_name(f->kind)) + ", dataset wants " +
                      std::string(dsp::kind_name(cfg.kind)));
    }
  }
  return {std::move(s), std::move(t)};
}

}  // namespace detail

/// Aligns, featurises and chunks every manifest pair in id order. Pairs that
/// fail (unreadable audio, alignment, frame or label mismatches) are skipped
/// and reported through `log`. With a fixed vocabulary (`grow_vocab` false)
/// unknown triphones reject the pair.
inline Dataset build_dataset(const std::vector<UtterancePair>& manifest, const DatasetConfig& cfg,
                             std::optional<TriphoneVocab> vocab = std::nullopt, const RejectionLog& log = {}) {
  cfg.validate();
  const bool grow = !vocab.has_value();
  Dataset ds{cfg, {}, {}, vocab.value_or(TriphoneVocab{})};
  ds.stats.pairs_total = manifest.size();
  std::vector<const UtterancePair*> order;
  for (const auto& p : manifest) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::optional<bool> labelled;
  for (const UtterancePair* p : order) {
    try {
      if (labelled && *labelled != p->labels.has_value()) {
        throw DataError("mixes labelled and unlabelled pairs; label every pair or none");
      }
      auto [whisper, natural] = detail::pair_features(*p, cfg);
      std::optional<std::vector<std::int32_t>> labels;
      if (p->labels) {
        TriphoneVocab trial = ds.vocab;  // commit new tokens only if the pair is kept
        labels = read_labels(*p->labels, trial, grow);
        if (labels->size() != whisper.length()) {
          throw DataError(std::to_string(labels->size()) + " labels for " + std::to_string(whisper.length()) +
                          " frames");
        }
        auto examples = cfg.direction == Direction::kWhisperToNatural
                            ? chunk(whisper, natural, &*labels, cfg.k, p->id)
                            : chunk(natural, whisper, nullptr, cfg.k, p->id);
        if (cfg.direction == Direction::kNaturalToWhisper) {
          // Frames are aligned, so the labels index either side.
          for (auto& ex : examples) {
            ex.labels.assign(labels->begin() + ex.chunk_index * cfg.k, labels->begin() + (ex.chunk_index + 1) * cfg.k);
          }
        }
        ds.vocab = std::move(trial);
        for (auto& ex : examples) ds.examples.push_back(std::move(ex));
      } else {
        auto examples = cfg.direction == Direction::kWhisperToNatural ? chunk(whisper, natural, nullptr, cfg.k, p->id)
                                                                      : chunk(natural, whisper, nullptr, cfg.k, p->id);
        for (auto& ex : examples) ds.examples.push_back(std::move(ex));
      }
      if (!labelled) labelled = p->labels.has_value();
      ++ds.stats.pairs_kept;
    } catch (const Error& e) {
      Rejection r{p->id, e.what()};
      if (log) log(r);
      ds.stats.rejected.push_back(std::move(r));
    } catch (const std::filesystem::filesystem_error& e) {
      Rejection r{p->id, e.what()};
      if (log) log(r);
      ds.stats.rejected.push_back(std::move(r));
    }
  }
  if (ds.stats.pairs_kept == 0 || ds.examples.empty()) {
    throw DataError("no usable pairs: " + std::to_string(ds.stats.rejected.size()) + " of " +
                    std::to_string(ds.stats.pairs_total) + " rejected" +
                    (ds.stats.rejected.empty() ? "" : " (first: " + ds.stats.rejected.front().id + ": " +
                                                           ds.stats.rejected.front().reason + ")"));
  }
  ds.stats.chunks = ds.examples.size();
  ds.stats.vocab_size = labelled.value_or(false) ? ds.vocab.size() : 0;
  ds.stats.d_in = ds.examples.front().src.dim(1);
  ds.stats.d_out = ds.examples.front().tgt.dim(1);
  return ds;
}

inline nlohmann::json stats_json(const DatasetStats& s) {
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& r : s.rejected) rej.push_back({{"id", r.id}, {"reason", r.reason}});
  return {{"pairs_total", s.pairs_total}, {"pairs_kept", s.pairs_kept}, {"pairs_rejected", s.rejected.size()},
          {"chunks", s.chunks},           {"vocab_size", s.vocab_size}, {"d_in", s.d_in},
          {"d_out", s.d_out},             {"rejected", rej}};
}

/// Writes shards, vocab.txt and dataset.json into `dir`.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json shards = nlohmann::json::array();
  const std::size_t n = ds.examples.size(), per = ds.config.shard_size;
  for (std::size_t lo = 0, i = 0; lo < n; lo += per, ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "shard_%04zu.wfea", i);
    write_shard(dir / name, std::span(ds.examples).subspan(lo, std::min(per, n - lo)));
    shards.push_back(name);
  }
  if (ds.stats.vocab_size > 0) ds.vocab.save(dir / "vocab.txt");
  const nlohmann::json meta{{"kind", dsp::kind_name(ds.config.kind)},
                            {"direction", direction_name(ds.config.direction)},
                            {"k", ds.config.k},
                            {"shards", shards},
                            {"stats", stats_json(ds.stats)}};
  const std::string text = meta.dump(2) + "\n";
  io::write_file(dir / "dataset.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto bytes = io::read_file(dir / "dataset.json");
  Dataset ds;
  try {
    const auto meta = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto kind = dsp::parse_kind(meta.at("kind").get<std::string>());
    if (!kind) throw FormatError("unknown feature kind in dataset.json");
    ds.config.kind = *kind;
    ds.config.direction = parse_direction(meta.at("direction").get<std::string>());
    ds.config.k = meta.at("k").get<std::size_t>();
    const auto& st = meta.at("stats");
    ds.stats.pairs_total = st.at("pairs_total");
    ds.stats.pairs_kept = st.at("pairs_kept");
    ds.stats.chunks = st.at("chunks");
    ds.stats.vocab_size = st.at("vocab_size");
    ds.stats.d_in = st.at("d_in");
    ds.stats.d_out = st.at("d_out");
    for (const auto& r : st.at("rejected")) ds.stats.rejected.push_back({r.at("id"), r.at("reason")});
    for (const auto& s : meta.at("shards")) {
      for (auto& ex : read_shard(dir / s.get<std::string>())) ds.examples.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "dataset.json").string() + ": " + e.what());
  }
  if (ds.examples.size() != ds.stats.chunks) throw FormatError(dir.string() + ": shard contents disagree with stats");
  if (ds.stats.vocab_size > 0) {
    ds.vocab = TriphoneVocab::load(dir / "vocab.txt");
    if (ds.vocab.size() != ds.stats.vocab_size) throw FormatError(dir.string() + ": vocab.txt size mismatch");
  }
  return ds;
}

}  // namespace w2n
