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

// Checkpoint container:
//
//   "WHLT0001"
//   u32 n, n bytes of JSON  {"model": ModelConfig, "meta": {...}}
//   u32 blob count
//   per blob: u32 name length, name, u8 dtype (0 = f32, 1 = f64), u8 rank,
//             u32 extents[rank], row-major little-endian payload
//   u32 CRC-32 of all preceding bytes
//
// Model parameters are f32 blobs named by parameter; optimizer state rides
// along as f64 blobs under the "state/" prefix.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "w2n/io/binary.hpp"
#include "w2n/model/params.hpp"

namespace w2n {

inline constexpr std::string_view kCheckpointMagic = "WHLT0001";

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::map<std::string, Tensor> state;  // stored at 64-bit precision
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

inline void put_blob(io::ByteWriter& w, const std::string& name, const Tensor& t, bool f64) {
  w.put_string(name);
  w.put<std::uint8_t>(f64 ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (auto e : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
  if (f64) {
    for (double v : t.data()) w.put<double>(v);
  } else {
    w.put_f32_array(t.vec());
  }
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put_string(nlohmann::json{{"model", ck.config}, {"meta", ck.meta}}.dump());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.params.size() + ck.state.size()));
  for (const auto& [name, t] : ck.params) detail::put_blob(w, name, t, false);
  for (const auto& [name, t] : ck.state) detail::put_blob(w, "state/" + name, t, true);
  w.put_crc();
  return w.bytes();
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic(kCheckpointMagic);
  Checkpoint ck;
  nlohmann::json head;
  try {
    head = nlohmann::json::parse(r.get_string());
    ck.config = head.at("model").get<ModelConfig>();
    ck.meta = head.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad config block: ") + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.get_string();
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint8_t>();
    if (dtype > 1 || rank == 0) r.fail("bad blob header for " + name);
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.get<std::uint32_t>();
      if (e == 0) r.fail("zero extent in blob " + name);
    }
    const std::size_t count = shape_numel(shape);
    if (count * (dtype ? 8 : 4) > r.remaining()) r.fail("truncated blob " + name);
    std::vector<double> values;
    if (dtype == 1) {
      values.resize(count);
      for (auto& v : values) v = r.get<double>();
    } else {
      values = r.get_f32_array(count);
    }
    Tensor t(std::move(shape), std::move(values));
    if (name.starts_with("state/")) {
      ck.state.emplace(name.substr(6), std::move(t));
    } else {
      ck.params.emplace(std::move(name), std::move(t));
    }
  }
  r.expect_crc_trailer();
  try {
    ck.config.validate();
    check_params(ck.config, ck.params);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace w2n
