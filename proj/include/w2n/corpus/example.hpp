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

#include <cstdint>
#include <string>
#include <vector>

#include "w2n/numerics/tensor.hpp"

namespace w2n {

/// One aligned chunk: k source frames, k target frames and, when available,
/// the k source-side triphone ids.
struct TrainingExample {
  Tensor src;                    // (k, d_in)
  Tensor tgt;                    // (k, d_out)
  std::vector<std::int32_t> labels;  // empty or k entries
  std::string utterance_id;
  std::uint32_t chunk_index = 0;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

}  // namespace w2n
