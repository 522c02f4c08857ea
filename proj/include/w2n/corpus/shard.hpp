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


// Shard container (same family as feature files):
//
//   "WFEA0001", 16-byte tag "shard"
//   u32 n, u32 k, u32 d_in, u32 d_out, u8 has_labels
//   n records: u32-length id, u32 chunk index, k*d_in f32, k*d_out f32,
//              k i32 labels when has_labels
//   u32 CRC-32

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "w2n/corpus/example.hpp"
#include "w2n/dsp/features.hpp"

namespace w2n {

inline constexpr std::string_view kShardTag = "shard";

inline std::vector<std::uint8_t> encode_shard(std::span<const TrainingExample> examples) {
  if (examples.empty()) throw ContractError("cannot write an empty shard");
  const auto& first = examples.front();
  const std::size_t k = first.src.dim(0), d_in = first.src.dim(1), d_out = first.tgt.dim(1);
  const bool has_labels = !first.labels.empty();
  io::ByteWriter w;
  w.put_bytes(dsp::kFeatureMagic);
  w.put_tag(kShardTag, dsp::kKindTagWidth);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(examples.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d_in));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d_out));
  w.put<std::uint8_t>(has_labels ? 1 : 0);
  for (const auto& ex : examples) {
    if (ex.src.shape() != Shape{k, d_in} || ex.tgt.shape() != Shape{k, d_out} ||
        ex.labels.size() != (has_labels ? k : 0)) {
      throw DimensionError("shard example " + ex.utterance_id + "#" + std::to_string(ex.chunk_index) +
                           " does not match the shard layout");
    }
    w.put_string(ex.utterance_id);
    w.put<std::uint32_t>(ex.chunk_index);
    w.put_f32_array(ex.src.vec());
    w.put_f32_array(ex.tgt.vec());
    for (auto l : ex.labels) w.put<std::int32_t>(l);
  }
  w.put_crc();
  return w.bytes();
}

inline std::vector<TrainingExample> decode_shard(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic(dsp::kFeatureMagic);
  if (r.get_tag(dsp::kKindTagWidth) != kShardTag) r.fail("not a shard");
  const auto n = r.get<std::uint32_t>(), k = r.get<std::uint32_t>();
  const auto d_in = r.get<std::uint32_t>(), d_out = r.get<std::uint32_t>();
  const bool has_labels = r.get<std::uint8_t>() != 0;
  if (n == 0 || k == 0 || d_in == 0 || d_out == 0) r.fail("empty shard header");
  std::vector<TrainingExample> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.utterance_id = r.get_string();
    ex.chunk_index = r.get<std::uint32_t>();
    ex.src = Tensor({k, d_in}, r.get_f32_array(std::size_t{k} * d_in));
    ex.tgt = Tensor({k, d_out}, r.get_f32_array(std::size_t{k} * d_out));
    if (has_labels) {
      for (std::uint32_t j = 0; j < k; ++j) ex.labels.push_back(r.get<std::int32_t>());
    }
    if (!ex.src.all_finite() || !ex.tgt.all_finite()) r.fail("non-finite frames in " + ex.utterance_id);
    out.push_back(std::move(ex));
  }
  r.expect_crc_trailer();
  return out;
}

inline void write_shard(const std::filesystem::path& path, std::span<const TrainingExample> examples) {
  io::write_file(path, encode_shard(examples));
}

inline std::vector<TrainingExample> read_shard(const std::filesystem::path& path) {
  return decode_shard(io::read_file(path), path.string());
}

}  // namespace w2n
