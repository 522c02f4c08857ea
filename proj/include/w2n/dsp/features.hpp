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


// Feature container, shared by dsp and corpus:
//
//   "WFEA0001"
//   16-byte kind tag, zero padded ("mfcc80", "spectral24", "f0_1",
//   "aperiodic513", "specdb")
//   u32 T, u32 d
//   T*d f32, row-major
//   u32 CRC-32 of all preceding bytes
//
// Frame timing is not stored; every kind uses 25 ms frames every 10 ms.

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "w2n/io/binary.hpp"
#include "w2n/numerics/tensor.hpp"

namespace w2n::dsp {

inline constexpr std::string_view kFeatureMagic = "WFEA0001";
inline constexpr std::size_t kKindTagWidth = 16;

enum class FeatureKind { kMfcc80, kSpectral24, kF0, kAperiodic513, kSpecDb };

struct KindInfo {
  FeatureKind kind;
  std::string_view name;
  std::size_t dim;  // 0 = any
};

inline constexpr std::array<KindInfo, 5> kKinds{{{FeatureKind::kMfcc80, "mfcc80", 80},
                                                 {FeatureKind::kSpectral24, "spectral24", 24},
                                                 {FeatureKind::kF0, "f0_1", 1},
                                                 {FeatureKind::kAperiodic513, "aperiodic513", 513},
                                                 {FeatureKind::kSpecDb, "specdb", 0}}};

inline const KindInfo& kind_info(FeatureKind k) {
  for (const auto& i : kKinds)
    if (i.kind == k) return i;
  throw ContractError("unknown feature kind");
}

inline std::string_view kind_name(FeatureKind k) { return kind_info(k).name; }
inline std::size_t kind_dim(FeatureKind k) { return kind_info(k).dim; }

inline std::optional<FeatureKind> parse_kind(std::string_view s) {
  for (const auto& i : kKinds)
    if (i.name == s) return i.kind;
  return std::nullopt;
}

struct FeatureSequence {
  Tensor frames;  // (T, d)
  FeatureKind kind = FeatureKind::kMfcc80;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double sample_rate = 16000.0;
  std::string source_id;

  std::size_t length() const { return frames.dim(0); }
  std::size_t dim() const { return frames.dim(1); }

  void validate() const {
    if (frames.rank() != 2) throw DimensionError("feature frames must be (T, d), got " + shape_str(frames.shape()));
    const std::size_t want = kind_dim(kind);
    if (want != 0 && frames.dim(1) != want) {
      throw DimensionError(std::string(kind_name(kind)) + " features need d = " + std::to_string(want) + ", got " +
                           std::to_string(frames.dim(1)));
    }
    if (!frames.all_finite()) throw DataError("non-finite value in " + std::string(kind_name(kind)) + " features");
  }
};

inline std::vector<std::uint8_t> encode_features(const FeatureSequence& f) {
  f.validate();
  io::ByteWriter w;
  w.put_bytes(kFeatureMagic);
  w.put_tag(kind_name(f.kind), kKindTagWidth);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.length()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.dim()));
  w.put_f32_array(f.frames.vec());
  w.put_crc();
  return w.bytes();
}

inline FeatureSequence decode_features(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic(kFeatureMagic);
  const std::string tag = r.get_tag(kKindTagWidth);
  const auto kind = parse_kind(tag);
  if (!kind) r.fail("unknown feature kind '" + tag + "'");
  const auto T = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  if (T == 0 || d == 0) r.fail("empty feature matrix");
  if (static_cast<std::uint64_t>(T) * d * 4 > r.remaining()) r.fail("truncated payload");
  FeatureSequence f;
  f.kind = *kind;
  f.frames = Tensor({T, d}, r.get_f32_array(static_cast<std::size_t>(T) * d));
  r.expect_crc_trailer();
  f.source_id = std::filesystem::path(source).stem().string();
  try {
    f.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return f;
}

inline void write_features(const std::filesystem::path& path, const FeatureSequence& f) {
  io::write_file(path, encode_features(f));
}

inline FeatureSequence read_features(const std::filesystem::path& path) {
  return decode_features(io::read_file(path), path.string());
}

}  // namespace w2n::dsp
