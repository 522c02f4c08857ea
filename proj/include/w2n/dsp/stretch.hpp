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

#include "w2n/dsp/stft.hpp"

namespace w2n::dsp {

struct StretchOptions {
  std::size_t n_fft = 1024;
  std::size_t synthesis_hop = 256;
};

inline constexpr double kMinStretch = 0.5;
inline constexpr double kMaxStretch = 2.0;

/// Phase-vocoder time stretch: output length is round(len * ratio) and pitch
/// is kept. Analysis frames advance by synthesis_hop / ratio (rounded per
/// frame); each bin's phase is re-accumulated from its measured frequency.
inline Waveform time_stretch(const Waveform& w, double ratio, const StretchOptions& opt = {}) {
  w.validate();
  if (!(ratio >= kMinStretch && ratio <= kMaxStretch)) {
    throw ParameterError("stretch ratio " + std::to_string(ratio) + " outside [0.5, 2]");
  }
  const std::size_t N = opt.n_fft, Hs = opt.synthesis_hop;
  if (N < 4 || Hs == 0 || Hs > N / 2) throw ParameterError("stretch needs n_fft >= 4 and 0 < hop <= n_fft/2");
  const std::size_t n = w.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  Waveform out{std::vector<double>(n_out, 0.0), w.sample_rate};
  if (n == 0 || n_out == 0) return out;

  // Centre frames on the signal by padding half a window each side.
  const std::size_t pad = N / 2;
  std::vector<double> x(n + 2 * pad + 3 * N, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), x.begin() + static_cast<std::ptrdiff_t>(pad));
  const double Ha = static_cast<double>(Hs) / ratio;
  const std::size_t frames = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / Ha)) + 2;

  RealFft& fft = real_fft(N);
  const std::size_t K = fft.bins();
  const std::vector<double> win = hann(N);
  std::vector<double> y((frames - 1) * Hs + N, 0.0), norm(y.size(), 0.0);
  std::vector<double> buf(N), prev_phase(K, 0.0), acc_phase(K, 0.0);
  std::vector<Complex> spec(K);
  std::size_t prev_pos = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(f) * Ha));
    for (std::size_t i = 0; i < N; ++i) buf[i] = x[pos + i] * win[i];
    fft.forward(buf, spec);
    const double step = static_cast<double>(pos - prev_pos);
    for (std::size_t k = 0; k < K; ++k) {
      const double phase = std::arg(spec[k]);
      if (f == 0) {
        acc_phase[k] = phase;
      } else {
        const double omega = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(N);
        double dev = phase - prev_phase[k] - omega * step;
        dev -= 2.0 * std::numbers::pi * std::round(dev / (2.0 * std::numbers::pi));
        const double freq = omega + (step > 0.0 ? dev / step : 0.0);
        acc_phase[k] += freq * static_cast<double>(Hs);
      }
      prev_phase[k] = phase;
      spec[k] = std::polar(std::abs(spec[k]), acc_phase[k]);
    }
    prev_pos = pos;
    fft.inverse(spec, buf);
    const std::size_t at = f * Hs;
    for (std::size_t i = 0; i < N; ++i) {
      y[at + i] += buf[i] * win[i];
      norm[at + i] += win[i] * win[i];
    }
  }
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t j = i + pad;
    if (j < y.size() && norm[j] > 1e-8) out.samples[i] = y[j] / norm[j];
  }
  return out;
}

}  // namespace w2n::dsp
