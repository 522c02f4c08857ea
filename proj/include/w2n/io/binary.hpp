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

// Little-endian byte buffers and the CRC-32 trailer shared by every binary
// container (feature files, shards, checkpoints).

#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "w2n/errors.hpp"

namespace w2n::io {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const std::size_t chunk = std::min<std::size_t>(n, 1u << 30);
    crc = ::crc32(crc, data, static_cast<uInt>(chunk));
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  /// Fixed-width ASCII field, zero padded; longer strings are rejected.
  void put_tag(std::string_view s, std::size_t width) {
    if (s.size() > width) throw FormatError("tag '" + std::string(s) + "' exceeds " + std::to_string(width) + " bytes");
    put_bytes(s);
    buf_.insert(buf_.end(), width - s.size(), 0);
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  void put_f32_array(const std::vector<double>& v) {
    for (double x : v) put<float>(static_cast<float>(x));
  }
  void put_crc() { put<std::uint32_t>(crc32_of(buf_.data(), buf_.size())); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }

  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

inline void ByteWriter::write_file(const std::filesystem::path& path) const { io::write_file(path, buf_); }

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, std::string source)
      : buf_(std::move(bytes)), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_tag(std::size_t width) {
    std::string s = get_bytes(width);
    s.erase(s.find_last_not_of('\0') + 1);
    return s;
  }
  std::string get_string() { return get_bytes(get<std::uint32_t>()); }
  std::vector<double> get_f32_array(std::size_t n) {
    need(n * sizeof(float));
    std::vector<double> v(n);
    for (auto& x : v) x = get<float>();
    return v;
  }
  /// Checks the trailing CRC over everything before it and that nothing follows.
  void expect_crc_trailer() {
    if (buf_.size() - pos_ != sizeof(std::uint32_t)) fail("unexpected trailing bytes before checksum");
    const std::uint32_t want = crc32_of(buf_.data(), pos_);
    if (get<std::uint32_t>() != want) fail("checksum mismatch");
  }
  void expect_magic(std::string_view magic) {
    if (buf_.size() < magic.size() || get_bytes(magic.size()) != magic) fail("bad magic, expected " + std::string(magic));
  }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError(source_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated (needed " + std::to_string(n) + " more bytes)");
  }
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::string source_;
};

inline std::string hex32(std::uint32_t v) {
  char s[9];
  std::snprintf(s, sizeof s, "%08x", v);
  return s;
}

inline std::uint32_t file_crc32(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return crc32_of(bytes.data(), bytes.size());
}

}  // namespace w2n::io
