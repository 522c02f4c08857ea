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
#include <string>
#include <vector>

#include "w2n/corpus/example.hpp"
#include "w2n/dsp/features.hpp"

namespace w2n {

/// Non-overlapping k-frame windows over the common length of the two
/// streams; a trailing remainder shorter than k is dropped.
inline std::vector<TrainingExample> chunk(const dsp::FeatureSequence& src, const dsp::FeatureSequence& tgt,
                                          const std::vector<std::int32_t>* labels, std::size_t k,
                                          const std::string& utterance_id) {
  if (k == 0) throw ParameterError("chunk length k must be >= 1");
  src.validate();
  tgt.validate();
  const std::size_t ts = src.length(), tt = tgt.length();
  if ((ts > tt ? ts - tt : tt - ts) > 1) {
    throw DataError(utterance_id + ": source has " + std::to_string(ts) + " frames, target " + std::to_string(tt) +
                    " (tolerance 1)");
  }
  if (labels && labels->size() != ts) {
    throw DataError(utterance_id + ": " + std::to_string(labels->size()) + " labels for " + std::to_string(ts) +
                    " source frames");
  }
  const std::size_t T = std::min(ts, tt), ds = src.dim(), dt = tgt.dim();
  std::vector<TrainingExample> out;
  out.reserve(T / k);
  for (std::size_t c = 0; c < T / k; ++c) {
    TrainingExample ex{Tensor({k, ds}), Tensor({k, dt}), {}, utterance_id, static_cast<std::uint32_t>(c)};
    const std::size_t f0 = c * k;
    std::copy_n(src.frames.data().begin() + f0 * ds, k * ds, ex.src.data().begin());
    std::copy_n(tgt.frames.data().begin() + f0 * dt, k * dt, ex.tgt.data().begin());
    if (labels) ex.labels.assign(labels->begin() + f0, labels->begin() + f0 + k);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace w2n
