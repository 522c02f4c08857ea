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
#include <numeric>

#include "w2n/dsp/wav.hpp"

namespace w2n::dsp {

struct ResampleOptions {
  std::size_t zero_crossings = 32;  // one-sided kernel length in lobes of the narrower band
  double kaiser_beta = 8.6;
  double rolloff = 0.95;  // cutoff as a fraction of the lower Nyquist rate
};

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double kaiser(double u, double beta) {
  // u in [-1, 1]
  const double r = 1.0 - u * u;
  if (r <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(r)) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace detail

/// Band-limited rate conversion with a Kaiser-windowed sinc. For the rational
/// ratio out/in = L/M the kernel only takes L distinct phases, which are
/// tabulated once.
inline Waveform resample(const Waveform& w, double target_rate, const ResampleOptions& opt = {}) {
  w.validate();
  if (!(target_rate > 0.0) || !std::isfinite(target_rate)) throw ParameterError("target rate must be positive");
  if (target_rate == w.sample_rate) return w;
  if (target_rate != std::round(target_rate) || w.sample_rate != std::round(w.sample_rate)) {
    throw ParameterError("resample needs integral sample rates");
  }
  const auto in_rate = static_cast<std::uint64_t>(w.sample_rate);
  const auto out_rate = static_cast<std::uint64_t>(target_rate);
  const std::uint64_t g = std::gcd(in_rate, out_rate);
  const std::uint64_t L = out_rate / g, M = in_rate / g;  // output index m sits at input time m*M/L

  const double fc = opt.rolloff * std::min(1.0, static_cast<double>(L) / static_cast<double>(M));
  const double half = static_cast<double>(opt.zero_crossings) / fc;  // half-width in input samples
  const auto taps = static_cast<std::ptrdiff_t>(std::ceil(half));

  const std::size_t n_in = w.samples.size();
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * static_cast<double>(L) / static_cast<double>(M)));

  // phase p = (m*M) mod L, fractional offset p/L; kernel tap j at distance (j - p/L).
  const bool tabulate = L <= 4096;
  std::vector<double> table;
  auto kernel = [&](double dist) { return fc * detail::sinc(fc * dist) * detail::kaiser(dist / half, opt.kaiser_beta); };
  const std::size_t width = static_cast<std::size_t>(2 * taps + 1);
  if (tabulate) {
    table.resize(L * width);
    for (std::uint64_t p = 0; p < L; ++p) {
      const double frac = static_cast<double>(p) / static_cast<double>(L);
      for (std::ptrdiff_t j = -taps; j <= taps; ++j) {
        table[p * width + static_cast<std::size_t>(j + taps)] = kernel(static_cast<double>(j) - frac);
      }
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const std::uint64_t pos = m * M;
    const auto base = static_cast<std::ptrdiff_t>(pos / L);
    const std::uint64_t p = pos % L;
    const double frac = static_cast<double>(p) / static_cast<double>(L);
    double acc = 0.0;
    for (std::ptrdiff_t j = -taps; j <= taps; ++j) {
      const std::ptrdiff_t i = base + j;
      if (i < 0 || i >= static_cast<std::ptrdiff_t>(n_in)) continue;
      const double h = tabulate ? table[p * width + static_cast<std::size_t>(j + taps)]
                                : kernel(static_cast<double>(j) - frac);
      acc += h * w.samples[static_cast<std::size_t>(i)];
    }
    out.samples[m] = acc;
  }
  return out;
}

}  // namespace w2n::dsp
