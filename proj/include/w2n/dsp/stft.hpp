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

#include <cmath>
#include <numbers>
#include <vector>

#include "w2n/dsp/fft.hpp"
#include "w2n/dsp/wav.hpp"

namespace w2n::dsp {

struct FrameSpec {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_fft = 512;

  std::size_t frame_len(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
  }
  std::size_t hop_len(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
  }
};

/// T = 1 + floor((n - frame) / hop); throws when n < frame.
inline std::size_t frame_count(std::size_t n, std::size_t frame, std::size_t hop) {
  if (frame == 0 || hop == 0) throw ParameterError("frame and hop must be >= 1 sample");
  if (n < frame) {
    throw DataError("signal of " + std::to_string(n) + " samples is shorter than one frame (" + std::to_string(frame) +
                    ")");
  }
  return 1 + (n - frame) / hop;
}

/// Periodic Hann window.
inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    w[i] = s * s;
  }
  return w;
}

/// Row-major T x bins complex matrix.
struct Spectrum {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<Complex> values;

  Complex& at(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  const Complex& at(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

/// Hann-windowed frames of `frame` samples every `hop`, zero-padded to n_fft.
inline Spectrum stft_samples(std::span<const double> x, std::size_t frame, std::size_t hop, std::size_t n_fft) {
  if (n_fft < frame) {
    throw ParameterError("n_fft (" + std::to_string(n_fft) + ") is shorter than the frame (" + std::to_string(frame) +
                         ")");
  }
  const std::size_t T = frame_count(x.size(), frame, hop);
  RealFft& fft = real_fft(n_fft);
  const std::vector<double> win = hann(frame);
  Spectrum s{T, fft.bins(), std::vector<Complex>(T * fft.bins())};
  std::vector<double> buf(frame);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < frame; ++i) buf[i] = x[t * hop + i] * win[i];
    fft.forward(buf, std::span(s.values).subspan(t * s.bins, s.bins));
  }
  return s;
}

inline Spectrum stft(const Waveform& w, const FrameSpec& spec = {}) {
  w.validate();
  return stft_samples(w.samples, spec.frame_len(w.sample_rate), spec.hop_len(w.sample_rate), spec.n_fft);
}

}  // namespace w2n::dsp
