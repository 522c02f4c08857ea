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

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "w2n/dsp/features.hpp"
#include "w2n/dsp/fft.hpp"
#include "w2n/dsp/mfcc.hpp"
#include "w2n/dsp/stft.hpp"
#include "w2n/dsp/wav.hpp"
#include "w2n/evaluation/lpc.hpp"

namespace w2n {

inline constexpr std::size_t kTrackFeatures = 5;
inline constexpr std::array<const char*, kTrackFeatures> kTrackNames{"F0", "F1", "F2", "F3", "F4"};

/// values[0] is F0, values[1..4] are F1..F4.
struct FormantFrame {
  std::array<std::optional<double>, kTrackFeatures> values;
  bool voiced() const { return values[0].has_value(); }
};

struct FormantTrack {
  std::string id;
  double sample_rate = 16000.0;
  std::vector<FormantFrame> frames;

  void validate() const {
    const double nyquist = sample_rate / 2.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      double last = 0.0;
      for (std::size_t j = 0; j < kTrackFeatures; ++j) {
        const auto& v = frames[t].values[j];
        if (!v) continue;
        if (!(*v > 0.0) || !(*v < nyquist)) {
          throw ContractError(id + " frame " + std::to_string(t) + ": " + kTrackNames[j] + " out of range");
        }
        if (j > 0) {
          if (!(*v > last)) throw ContractError(id + " frame " + std::to_string(t) + ": formants not increasing");
          last = *v;
        }
      }
    }
  }
};

struct AnalysisOptions {
  dsp::FrameSpec frames;
  std::size_t lpc_order = 0;  // 0 picks 2 + fs/1000
  F0Options f0;
  FormantGate gate;
  double floor_db = -60.0;  // frames this far below the loudest are skipped
};

/// Upper edge of the band used for pitch on reconstructed spectra.
inline constexpr double kPitchBandHz = 1000.0;

namespace detail {

inline void fill_formants(FormantFrame& fr, std::span<const double> frame, double fs, std::size_t order,
                          const FormantGate& gate) {
  if (frame.size() <= order) return;
  LpcResult lpc;
  try {
    lpc = burg_lpc(frame, order);
  } catch (const EstimationError&) {
    return;  // silent frame: formantless
  }
  const auto fm = lpc_to_formants(lpc.a, fs, gate);
  for (std::size_t i = 0; i < fm.size() && i < 4; ++i) fr.values[i + 1] = fm[i].frequency;
}

inline std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return w;
}

}  // namespace detail

/// Per-frame F0 and F1..F4 of a waveform. Formants come from Burg LPC on a
/// Hamming-windowed frame; F0 uses a centred window stretched to two periods of fmin.
inline FormantTrack analyze_waveform(const dsp::Waveform& w, const AnalysisOptions& opt = {}, std::string id = {}) {
  w.validate();
  const double fs = w.sample_rate;
  const std::size_t frame = opt.frames.frame_len(fs), hop = opt.frames.hop_len(fs);
  const std::size_t order = opt.lpc_order ? opt.lpc_order : default_lpc_order(fs);
  const std::size_t T = dsp::frame_count(w.samples.size(), frame, hop);
  const std::size_t f0_len = std::max(frame, min_f0_frame(fs, opt.f0.fmin));
  const auto win = detail::hamming(frame);

  std::vector<double> energy(T, 0.0);
  double peak = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < frame; ++i) energy[t] += w.samples[t * hop + i] * w.samples[t * hop + i];
    peak = std::max(peak, energy[t]);
  }
  const double gate = peak * std::pow(10.0, opt.floor_db / 10.0);

  FormantTrack track{std::move(id), fs, std::vector<FormantFrame>(T)};
  std::vector<double> buf(frame);
  for (std::size_t t = 0; t < T; ++t) {
    if (!(energy[t] > gate)) continue;
    for (std::size_t i = 0; i < frame; ++i) buf[i] = w.samples[t * hop + i] * win[i];
    detail::fill_formants(track.frames[t], buf, fs, order, opt.gate);
    if (f0_len <= w.samples.size()) {
      const std::size_t centre = t * hop + frame / 2;
      const std::size_t start = std::min(centre > f0_len / 2 ? centre - f0_len / 2 : 0, w.samples.size() - f0_len);
      track.frames[t].values[0] =
          estimate_f0(std::span<const double>(w.samples).subspan(start, f0_len), fs, opt.f0);
    }
  }
  track.validate();
  return track;
}

/// Linear power spectra (T, n_fft/2+1) implied by mfcc80 frames: the
/// orthonormal DCT is inverted exactly, then each band's energy is spread
/// back over the bins it covers as a density.
inline Tensor mfcc_power_spectra(const dsp::FeatureSequence& fs) {
  if (fs.kind != dsp::FeatureKind::kMfcc80) {
    throw ParameterError("spectral reconstruction needs mfcc80 features, got " + std::string(dsp::kind_name(fs.kind)));
  }
  const std::size_t M = 80, T = fs.length();
  const dsp::FrameSpec spec{fs.frame_ms, fs.hop_ms, 512};
  const auto fb = dsp::mel_filterbank(M, spec.n_fft, fs.sample_rate);
  const Tensor g = dsp::dct_matrix(M);
  const std::size_t K = fb.bins();
  std::vector<double> rowsum(M, 0.0), colsum(K, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) rowsum[m] += fb.weights[m * K + k];
  }
  for (std::size_t m = 0; m < M; ++m) {
    if (rowsum[m] <= 0.0) continue;
    for (std::size_t k = 0; k < K; ++k) colsum[k] += fb.weights[m * K + k];
  }
  Tensor out({T, K});
  std::vector<double> density(M);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      double logmel = 0.0;
      for (std::size_t c = 0; c < M; ++c) logmel += g[c * M + m] * fs.frames[t * M + c];
      density[m] = rowsum[m] > 0.0 ? std::exp(logmel) / rowsum[m] : 0.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (colsum[k] <= 0.0) continue;
      double p = 0.0;
      for (std::size_t m = 0; m < M; ++m) p += density[m] * fb.weights[m * K + k];
      out[t * K + k] = p / colsum[k];
    }
    // Bins no band reaches (DC, Nyquist) copy their neighbour.
    if (colsum[0] <= 0.0) out[t * K] = out[t * K + 1];
    if (colsum[K - 1] <= 0.0) out[t * K + K - 1] = out[t * K + K - 2];
  }
  return out;
}

/// Same track layout for mfcc80 feature frames. Each frame's power spectrum
/// becomes a zero-phase pulse for the Burg fit. F0 comes from the harmonic
/// ripple of the whitened low band, with the same lag range and threshold
/// as the waveform estimator.
inline FormantTrack analyze_mfcc(const dsp::FeatureSequence& fs, const AnalysisOptions& opt = {}, std::string id = {}) {
  fs.validate();
  const Tensor P = mfcc_power_spectra(fs);
  const std::size_t T = P.dim(0), K = P.dim(1), N = 2 * (K - 1);
  const double rate = fs.sample_rate;
  const std::size_t order = opt.lpc_order ? opt.lpc_order : default_lpc_order(rate);
  auto& fft = dsp::real_fft(N);

  std::vector<double> energy(T, 0.0);
  double peak = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) energy[t] += P[t * K + k];
    peak = std::max(peak, energy[t]);
  }
  const double gate = peak * std::pow(10.0, opt.floor_db / 10.0);

  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rate / opt.f0.fmax)));
  const auto hi = std::min(N / 2 - 1, static_cast<std::size_t>(std::ceil(rate / opt.f0.fmin)));
  FormantTrack track{std::move(id), rate, std::vector<FormantFrame>(T)};
  std::vector<dsp::Complex> spec(K);
  std::vector<double> pulse(N), shifted(N), r(N);
  for (std::size_t t = 0; t < T; ++t) {
    if (!(energy[t] > gate)) continue;
    for (std::size_t k = 0; k < K; ++k) spec[k] = std::sqrt(P[t * K + k]);
    fft.inverse(spec, pulse);
    for (std::size_t i = 0; i < N; ++i) shifted[i] = pulse[(i + N / 2) % N];
    detail::fill_formants(track.frames[t], shifted, rate, order, opt.gate);
    if (track.frames[t].values[1] == std::nullopt) continue;

    // Pitch: divide out the all-pole envelope, keep the band where harmonics
    // survive the mel smoothing, and look for the period of the log ripple.
    const LpcResult env = burg_lpc(shifted, order);
    const auto kmax = std::min(K - 1, static_cast<std::size_t>(kPitchBandHz * static_cast<double>(N) / rate));
    for (std::size_t k = 0; k < K; ++k) {
      if (k == 0 || k > kmax) {
        spec[k] = 0.0;
        continue;
      }
      std::complex<double> a = 1.0;
      for (std::size_t i = 0; i < env.a.size(); ++i) {
        a += env.a[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((i + 1) * k) / static_cast<double>(N));
      }
      spec[k] = std::log(P[t * K + k] * std::norm(a) + 1e-300);
    }
    // Only the harmonic ripple should correlate: remove the band mean and taper the edges.
    double mean = 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) mean += spec[k].real();
    mean /= static_cast<double>(kmax);
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double taper = std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(kmax + 1));
      spec[k] = (spec[k].real() - mean) * taper * taper;
    }
    fft.inverse(spec, r);
    if (!(r[0] > 0.0)) continue;
    std::size_t best = lo;
    for (std::size_t tau = lo; tau <= hi; ++tau) {
      if (r[tau] > r[best]) best = tau;
    }
    if (r[best] / r[0] < opt.f0.voicing_threshold) continue;
    for (std::size_t tau = lo; tau < best; ++tau) {
      if (r[tau] >= 0.9 * r[best] && r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1]) {
        best = tau;
        break;
      }
    }
    double lag = static_cast<double>(best);
    const double y0 = r[best - 1], y1 = r[best], y2 = r[best + 1], den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) lag += std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
    track.frames[t].values[0] = rate / lag;
  }
  track.validate();
  return track;
}

}  // namespace w2n
