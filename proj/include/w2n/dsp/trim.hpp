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

#include "w2n/dsp/wav.hpp"

namespace w2n::dsp {

struct TrimResult {
  Waveform audio;
  std::size_t start = 0;  // first kept sample of the input
  std::size_t end = 0;    // one past the last kept sample
};

/// Drops leading and trailing hop-sized blocks whose RMS falls below the
/// loudest block's RMS scaled by threshold_db. Interior samples are untouched.
inline TrimResult trim_silence_span(const Waveform& w, double threshold_db = -40.0, double hop_ms = 10.0) {
  w.validate();
  if (!(threshold_db < 0.0)) throw ParameterError("trim threshold must be negative dB relative to peak");
  if (!(hop_ms > 0.0)) throw ParameterError("trim hop must be positive");
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_ms * w.sample_rate / 1000.0)));
  const std::size_t n = w.samples.size();
  const std::size_t blocks = (n + hop - 1) / hop;
  std::vector<double> rms(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * hop, hi = std::min(n, lo + hop);
    double e = 0.0;
    for (std::size_t i = lo; i < hi; ++i) e += w.samples[i] * w.samples[i];
    rms[b] = std::sqrt(e / static_cast<double>(hi - lo));
  }
  const double peak = blocks ? *std::max_element(rms.begin(), rms.end()) : 0.0;
  if (peak <= 0.0) throw DataError("signal is silent; nothing left after trimming");
  const double floor = peak * std::pow(10.0, threshold_db / 20.0);
  std::size_t first = 0, last = blocks - 1;
  while (rms[first] < floor) ++first;
  while (rms[last] < floor) --last;
  TrimResult r;
  r.start = first * hop;
  r.end = std::min(n, (last + 1) * hop);
  r.audio.sample_rate = w.sample_rate;
  r.audio.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(r.start),
                         w.samples.begin() + static_cast<std::ptrdiff_t>(r.end));
  return r;
}

inline Waveform trim_silence(const Waveform& w, double threshold_db = -40.0, double hop_ms = 10.0) {
  return trim_silence_span(w, threshold_db, hop_ms).audio;
}

}  // namespace w2n::dsp
