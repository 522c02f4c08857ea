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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "w2n/io/binary.hpp"

namespace w2n::dsp {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  double sample_rate = 16000.0;

  double duration() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw ParameterError("sample rate must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i])) throw DataError("non-finite sample at index " + std::to_string(i));
    }
  }
};

inline constexpr double kPcm16Scale = 32768.0;

inline std::int16_t to_pcm16(double x) {
  const double v = std::round(x * kPcm16Scale);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

/// Parses a RIFF/WAVE file holding 16-bit PCM (plain or extensible). Multiple
/// channels are averaged to mono.
inline Waveform decode_wav(std::vector<std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  if (r.get_bytes(4) != "RIFF") r.fail("not a RIFF file");
  r.get<std::uint32_t>();  // riff size; trusted less than the chunk walk
  if (r.get_bytes(4) != "WAVE") r.fail("RIFF form is not WAVE");
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.get_bytes(4);
    const auto size = r.get<std::uint32_t>();
    if (size > r.remaining()) r.fail("chunk '" + id + "' runs past end of file");
    if (id == "fmt ") {
      if (size < 16) r.fail("fmt chunk too short");
      auto format = r.get<std::uint16_t>();
      channels = r.get<std::uint16_t>();
      rate = r.get<std::uint32_t>();
      r.get<std::uint32_t>();  // byte rate
      r.get<std::uint16_t>();  // block align
      bits = r.get<std::uint16_t>();
      std::size_t rest = size - 16;
      if (format == 0xFFFE) {
        if (rest < 24) r.fail("extensible fmt chunk too short");
        r.get_bytes(8);  // cbSize, valid bits, channel mask
        format = r.get<std::uint16_t>();  // first two bytes of the sub-format GUID
        r.get_bytes(14);
        rest -= 24;
      }
      r.get_bytes(rest);
      if (format != 1) r.fail("unsupported codec " + std::to_string(format) + " (only PCM)");
      if (bits != 16) r.fail("unsupported sample width " + std::to_string(bits) + " bits (only 16)");
      if (channels == 0 || rate == 0) r.fail("zero channels or sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) r.fail("data chunk before fmt chunk");
      const std::size_t frame = 2u * channels;
      if (size % frame != 0) r.fail("data size is not a whole number of sample frames");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / frame);
      for (auto& s : w.samples) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) acc += r.get<std::int16_t>();
        s = acc / channels / kPcm16Scale;
      }
      return w;
    } else {
      r.get_bytes(size);
    }
    if (size % 2 == 1 && r.remaining() > 0) r.get_bytes(1);
  }
  r.fail(have_fmt ? "no data chunk" : "no fmt chunk");
}

inline Waveform load_wav(const std::filesystem::path& path) { return decode_wav(io::read_file(path), path.string()); }

/// Mono 16-bit PCM; samples are clipped to the representable range.
inline std::vector<std::uint8_t> encode_wav(const Waveform& w) {
  w.validate();
  if (w.sample_rate != std::round(w.sample_rate) || w.sample_rate > 4294967295.0) {
    throw ParameterError("WAV needs an integral sample rate");
  }
  const auto rate = static_cast<std::uint32_t>(w.sample_rate);
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  io::ByteWriter out;
  out.put_bytes("RIFF");
  out.put<std::uint32_t>(36 + data_bytes);
  out.put_bytes("WAVEfmt ");
  out.put<std::uint32_t>(16);
  out.put<std::uint16_t>(1);
  out.put<std::uint16_t>(1);
  out.put<std::uint32_t>(rate);
  out.put<std::uint32_t>(rate * 2);
  out.put<std::uint16_t>(2);
  out.put<std::uint16_t>(16);
  out.put_bytes("data");
  out.put<std::uint32_t>(data_bytes);
  for (double s : w.samples) out.put<std::int16_t>(to_pcm16(s));
  return out.bytes();
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) { io::write_file(path, encode_wav(w)); }

}  // namespace w2n::dsp
