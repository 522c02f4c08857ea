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
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "w2n/errors.hpp"

namespace w2n {

using Tokens = std::vector<std::string>;

inline Tokens tokenize(const std::string& text) {
  std::istringstream in(text);
  Tokens out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t errors() const { return substitutions + deletions + insertions; }
};

/// Minimum-cost Levenshtein alignment; among equal-cost paths the backtrace
/// prefers substitution, then deletion, then insertion.
inline EditCounts align_tokens(const Tokens& ref, const Tokens& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditCounts c;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      c.substitutions += ref[i - 1] != hyp[j - 1];
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.deletions, --i;
    } else {
      ++c.insertions, --j;
    }
  }
  return c;
}

/// (S + D + I) / N. Not capped at 1.
inline double wer(const Tokens& ref, const Tokens& hyp) {
  if (ref.empty()) throw MetricError("WER needs a nonempty reference");
  return static_cast<double>(align_tokens(ref, hyp).errors()) / static_cast<double>(ref.size());
}

/// Corpus WER: total edits over total reference words.
inline double corpus_wer(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) {
  if (refs.size() != hyps.size()) throw MetricError("reference and hypothesis counts differ");
  std::size_t errs = 0, words = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    errs += align_tokens(refs[i], hyps[i]).errors();
    words += refs[i].size();
  }
  if (words == 0) throw MetricError("WER needs a nonempty reference");
  return static_cast<double>(errs) / static_cast<double>(words);
}

struct BleuStats {
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  double score = 0.0;  // 0..100
};

/// Corpus BLEU with one reference per hypothesis, clipped n-gram precisions
/// for n = 1..4, uniform weights and no smoothing.
inline BleuStats bleu_stats(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) {
  if (refs.size() != hyps.size()) throw MetricError("reference and hypothesis counts differ");
  if (refs.empty()) throw MetricError("BLEU needs at least one segment");
  BleuStats s;
  for (std::size_t seg = 0; seg < refs.size(); ++seg) {
    const Tokens& r = refs[seg];
    const Tokens& h = hyps[seg];
    s.ref_len += r.size();
    s.hyp_len += h.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<Tokens, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[Tokens(r.begin() + i, r.begin() + i + n)];
      std::map<Tokens, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[Tokens(h.begin() + i, h.begin() + i + n)];
      for (const auto& [gram, c] : hyp_counts) {
        auto it = ref_counts.find(gram);
        s.matches[n - 1] += std::min(c, it == ref_counts.end() ? 0 : it->second);
        s.totals[n - 1] += c;
      }
    }
  }
  double log_p = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.matches[n] == 0) return s;  // any empty precision zeroes the score
    log_p += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n])) / 4.0;
  }
  const double c = static_cast<double>(s.hyp_len), rl = static_cast<double>(s.ref_len);
  const double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
  s.score = 100.0 * bp * std::exp(log_p);
  return s;
}

inline double bleu(const std::vector<Tokens>& refs, const std::vector<Tokens>& hyps) {
  return bleu_stats(refs, hyps).score;
}

}  // namespace w2n
