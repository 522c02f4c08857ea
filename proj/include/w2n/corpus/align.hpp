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
#include <string>

#include "w2n/dsp/resample.hpp"
#include "w2n/dsp/stretch.hpp"
#include "w2n/dsp/trim.hpp"

namespace w2n {

struct AlignOptions {
  double sample_rate = 16000.0;
  double trim_db = -40.0;
  double hop_ms = 10.0;
};

struct AlignedPair {
  dsp::Waveform src;
  dsp::Waveform tgt;
  double ratio = 1.0;            // stretch applied to the shorter signal
  bool stretched_source = false;  // which side was stretched (when ratio != 1)
};

/// Resample both sides to the working rate, trim silence, then stretch the
/// shorter recording onto the longer one's duration.
inline AlignedPair align_pair(const dsp::Waveform& src, const dsp::Waveform& tgt, const AlignOptions& opt = {}) {
  auto prepare = [&](const dsp::Waveform& w, const char* side) {
    try {
      return dsp::trim_silence(dsp::resample(w, opt.sample_rate), opt.trim_db, opt.hop_ms);
    } catch (const DataError& e) {
      throw AlignmentError(std::string(side) + ": " + e.what());
    }
  };
  AlignedPair out{prepare(src, "source"), prepare(tgt, "target")};
  const std::size_t ns = out.src.samples.size(), nt = out.tgt.samples.size();
  const auto hop = static_cast<std::size_t>(std::lround(opt.hop_ms * opt.sample_rate / 1000.0));
  if (ns == nt) return out;
  const bool src_shorter = ns < nt;
  const double ratio = static_cast<double>(src_shorter ? nt : ns) / static_cast<double>(src_shorter ? ns : nt);
  if (ratio > dsp::kMaxStretch) {
    throw AlignmentError("durations differ by a factor of " + std::to_string(ratio) + " (limit " +
                         std::to_string(dsp::kMaxStretch) + ")");
  }
  out.ratio = ratio;
  out.stretched_source = src_shorter;
  dsp::Waveform& shorter = src_shorter ? out.src : out.tgt;
  shorter = dsp::time_stretch(shorter, ratio);
  const std::size_t a = out.src.samples.size(), b = out.tgt.samples.size();
  if ((a > b ? a - b : b - a) > hop) throw AlignmentError("stretched lengths still differ by more than one hop");
  return out;
}

}  // namespace w2n
