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

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "w2n/corpus/dataset.hpp"
#include "w2n/evaluation/report.hpp"
#include "w2n/io/binary.hpp"
#include "w2n/model/config.hpp"
#include "w2n/training/trainer.hpp"

namespace w2n {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a command can be configured with. Model widths, k and the
/// triphone vocabulary size are not here: they come from the prepared data.
struct RunConfig {
  std::string preset = "W2";
  bool aux = true;  // train the auxiliary decoder alongside (needs labelled data)
  ModelConfig model;
  TrainRunConfig train;
  DatasetConfig data;
  ReportOptions eval;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"W1", "W2", "W3", "V1", "V2", "V3"};
  return names;
}

/// W* use 80-dim MFCC, V* the 24-dim smoothed spectral features; *1 is the
/// plain transformer, *2 adds the auxiliary decoder, *3 is *2 run
/// natural-to-whisper.
inline RunConfig preset_config(const std::string& name) {
  if (name.size() != 2 || (name[0] != 'W' && name[0] != 'V') || name[1] < '1' || name[1] > '3') {
    throw ConfigError("unknown preset '" + name + "' (expected one of W1 W2 W3 V1 V2 V3)");
  }
  RunConfig c;
  c.preset = name;
  c.model.n_enc_layers = 6;
  c.model.n_dec_layers = 6;
  c.model.n_aux_layers = 3;
  c.model.tap_layer = 3;
  c.model.n_heads = 8;
  c.model.p_drop = 0.1;
  c.train.batch_size = 128;
  c.train.epochs = 80;
  c.train.warmup_steps = 4000;
  c.data.kind = name[0] == 'W' ? dsp::FeatureKind::kMfcc80 : dsp::FeatureKind::kSpectral24;
  c.data.direction = name[1] == '3' ? Direction::kNaturalToWhisper : Direction::kWhisperToNatural;
  c.data.k = 3;
  c.aux = name[1] != '1';
  return c;
}

inline nlohmann::json to_json_tree(const RunConfig& c) {
  nlohmann::json model = c.model;
  for (const char* derived : {"d_in", "d_out", "k", "triphone_vocab"}) model.erase(derived);
  nlohmann::json train = c.train;
  return {{"preset", c.preset},
          {"aux", c.aux},
          {"model", model},
          {"train", train},
          {"data",
           {{"kind", dsp::kind_name(c.data.kind)},
            {"direction", direction_name(c.data.direction)},
            {"k", c.data.k},
            {"shard_size", c.data.shard_size},
            {"sample_rate", c.data.align.sample_rate},
            {"trim_db", c.data.align.trim_db}}},
          {"eval",
           {{"k_max", c.eval.k_max},
            {"n_samples", c.eval.n_samples},
            {"seed", c.eval.seed},
            {"voiced_only", c.eval.voiced_only},
            {"grid_points", c.eval.grid_points}}}};
}

inline RunConfig from_json_tree(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.preset = j.at("preset").get<std::string>();
    c.aux = j.at("aux").get<bool>();
    nlohmann::json model = j.at("model");
    model["d_in"] = c.model.d_in;
    model["d_out"] = c.model.d_out;
    model["k"] = c.model.k;
    model["triphone_vocab"] = c.model.triphone_vocab;
    c.model = model.get<ModelConfig>();
    c.train = j.at("train").get<TrainRunConfig>();
    const auto& d = j.at("data");
    const auto kind = dsp::parse_kind(d.at("kind").get<std::string>());
    if (!kind) throw ConfigError("data.kind: unknown feature kind " + d.at("kind").dump());
    c.data.kind = *kind;
    c.data.direction = parse_direction(d.at("direction").get<std::string>());
    c.data.k = d.at("k").get<std::size_t>();
    c.data.shard_size = d.at("shard_size").get<std::size_t>();
    c.data.align.sample_rate = d.at("sample_rate").get<double>();
    c.data.align.trim_db = d.at("trim_db").get<double>();
    const auto& e = j.at("eval");
    c.eval.k_max = e.at("k_max").get<std::size_t>();
    c.eval.n_samples = e.at("n_samples").get<std::size_t>();
    c.eval.seed = e.at("seed").get<std::uint64_t>();
    c.eval.voiced_only = e.at("voiced_only").get<bool>();
    c.eval.grid_points = e.at("grid_points").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value type: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

namespace detail {

/// Rejects keys of `user` that the reference tree does not have, and
/// objects where the reference has scalars (and vice versa).
inline void check_keys(const nlohmann::json& user, const nlohmann::json& ref, const std::string& where) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!ref.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (value.is_object() != ref.at(key).is_object()) throw ConfigError("config key '" + path + "' has the wrong shape");
    if (value.is_object()) check_keys(value, ref.at(key), path);
  }
}

inline nlohmann::json parse_scalar(const std::string& text) {
  try {
    auto v = nlohmann::json::parse(text);
    if (!v.is_object() && !v.is_array()) return v;
  } catch (const nlohmann::json::exception&) {
  }
  return text;  // bare words are strings
}

}  // namespace detail

/// "a.b.c=value" against the tree. Numbers, booleans and quoted strings are
/// parsed as JSON; anything else is taken as a string.
inline void apply_override(nlohmann::json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  nlohmann::json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "' is a section, not a value");
  *node = detail::parse_scalar(assignment.substr(eq + 1));
}

struct ConfigSources {
  std::string preset;  // empty: the config file's preset, else W2
  std::filesystem::path config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
};

/// Layering, later wins: preset defaults, config file, --set overrides, then
/// the dedicated --seed / --deterministic flags.
inline RunConfig resolve_config(const ConfigSources& src) {
  nlohmann::json file = nlohmann::json::object();
  if (!src.config_file.empty()) {
    const auto bytes = io::read_file(src.config_file);
    try {
      file = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(src.config_file.string() + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError(src.config_file.string() + ": top level must be an object");
  }
  std::string preset = src.preset;
  if (preset.empty()) preset = file.contains("preset") ? file["preset"].get<std::string>() : "W2";
  nlohmann::json tree = to_json_tree(preset_config(preset));
  detail::check_keys(file, tree, "");
  tree.merge_patch(file);
  tree["preset"] = preset;
  for (const auto& o : src.overrides) apply_override(tree, o);
  RunConfig c = from_json_tree(tree);
  if (src.seed) {
    c.train.seed = *src.seed;
    c.eval.seed = *src.seed;
  }
  if (src.deterministic) c.train.deterministic = *src.deterministic;
  c.train.validate();
  c.data.validate();
  return c;
}

}  // namespace w2n
