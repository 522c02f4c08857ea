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

#include "w2n/dsp/features.hpp"
#include "w2n/dsp/stft.hpp"

namespace w2n::dsp {

inline constexpr double kSpectrogramFloorDb = -80.0;

/// Magnitude in dB relative to the loudest cell, clipped to [-80, 0];
/// (T, n_fft/2 + 1). A silent signal is the floor everywhere.
inline FeatureSequence spectrogram_db(const Waveform& w, const FrameSpec& spec = {}) {
  const Spectrum s = stft(w, spec);
  double peak = 0.0;
  for (const auto& c : s.values) peak = std::max(peak, std::abs(c));
  FeatureSequence out;
  out.kind = FeatureKind::kSpecDb;
  out.frame_ms = spec.frame_ms;
  out.hop_ms = spec.hop_ms;
  out.sample_rate = w.sample_rate;
  out.frames = Tensor({s.frames, s.bins});
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double mag = std::abs(s.values[i]);
    const double db = peak > 0.0 && mag > 0.0 ? 20.0 * std::log10(mag / peak) : kSpectrogramFloorDb;
    out.frames[i] = std::clamp(db, kSpectrogramFloorDb, 0.0);
  }
  return out;
}

inline void spectrogram_export(const Waveform& w, const std::filesystem::path& path, const FrameSpec& spec = {}) {
  write_features(path, spectrogram_db(w, spec));
}

}  // namespace w2n::dsp
