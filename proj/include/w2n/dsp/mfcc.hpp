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
#include <numbers>

#include "w2n/dsp/features.hpp"
#include "w2n/dsp/stft.hpp"

namespace w2n::dsp {

inline constexpr double kLogFloor = 1e-10;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// HTK-scale triangles spanning 0 Hz to Nyquist. Edge frequencies are the
/// n_mels + 2 points equally spaced in mel; filter i peaks (at 1) on point i+1.
struct MelFilterbank {
  std::vector<double> edges_hz;  // n_mels + 2
  Tensor weights;                // (n_mels, n_fft/2 + 1)

  std::size_t n_mels() const { return weights.dim(0); }
  std::size_t bins() const { return weights.dim(1); }
  double center_hz(std::size_t i) const { return edges_hz.at(i + 1); }

  /// Continuous triangle response of filter i at frequency hz.
  double response(std::size_t i, double hz) const {
    const double lo = edges_hz.at(i), c = edges_hz.at(i + 1), hi = edges_hz.at(i + 2);
    if (hz <= lo || hz >= hi) return 0.0;
    return hz <= c ? (hz - lo) / (c - lo) : (hi - hz) / (hi - c);
  }
};

inline MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate) {
  if (n_mels == 0 || n_fft < 2 || !(sample_rate > 0.0)) throw ParameterError("bad mel filterbank parameters");
  MelFilterbank fb;
  const double top = hz_to_mel(sample_rate / 2.0);
  fb.edges_hz.resize(n_mels + 2);
  for (std::size_t i = 0; i < n_mels + 2; ++i) {
    fb.edges_hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  const std::size_t bins = n_fft / 2 + 1;
  fb.weights = Tensor({n_mels, bins});
  for (std::size_t i = 0; i < n_mels; ++i) {
    for (std::size_t k = 0; k < bins; ++k) {
      fb.weights[i * bins + k] = fb.response(i, static_cast<double>(k) * sample_rate / static_cast<double>(n_fft));
    }
  }
  return fb;
}

/// Orthonormal DCT-II matrix G (n x n): c = G x, G^T G = I.
inline Tensor dct_matrix(std::size_t n) {
  Tensor g({n, n});
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      g[k * n + i] = s * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                  (2.0 * nn));
    }
  }
  return g;
}

struct MfccOptions {
  std::size_t n_mels = 80;
  std::size_t n_coeffs = 80;
  FrameSpec frames;
};

/// Power spectrum, mel filterbank, natural log floored at 1e-10, orthonormal
/// DCT-II truncated to n_coeffs. No liftering. Returns (T, n_coeffs).
inline Tensor mfcc_matrix(const Waveform& w, const MfccOptions& opt = {}) {
  if (opt.n_coeffs == 0 || opt.n_coeffs > opt.n_mels) throw ParameterError("n_coeffs must lie in [1, n_mels]");
  const Spectrum s = stft(w, opt.frames);
  const MelFilterbank fb = mel_filterbank(opt.n_mels, opt.frames.n_fft, w.sample_rate);
  const Tensor g = dct_matrix(opt.n_mels);
  const std::size_t M = opt.n_mels, C = opt.n_coeffs, K = s.bins;
  Tensor out({s.frames, C});
  std::vector<double> power(K), logmel(M);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t k = 0; k < K; ++k) power[k] = std::norm(s.at(t, k));
    for (std::size_t m = 0; m < M; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < K; ++k) e += fb.weights[m * K + k] * power[k];
      logmel[m] = std::log(std::max(e, kLogFloor));
    }
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += g[c * M + m] * logmel[m];
      out[t * C + c] = acc;
    }
  }
  return out;
}

/// The 80-dimensional feature stream (80 filters, all coefficients) of 16 kHz audio.
inline FeatureSequence mfcc(const Waveform& w, const FrameSpec& frames = {}) {
  if (w.sample_rate != 16000.0) {
    throw ParameterError("mfcc expects 16 kHz audio, got " + std::to_string(w.sample_rate) + " Hz");
  }
  FeatureSequence out;
  out.kind = FeatureKind::kMfcc80;
  out.frame_ms = frames.frame_ms;
  out.hop_ms = frames.hop_ms;
  out.sample_rate = w.sample_rate;
  out.frames = mfcc_matrix(w, {80, 80, frames});
  return out;
}

}  // namespace w2n::dsp
