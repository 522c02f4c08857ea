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

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "w2n/errors.hpp"

namespace w2n {

/// Prediction polynomial A(z) = 1 + a[0] z^-1 + ... + a[p-1] z^-p, so the
/// forward predictor is x[n] ~ -sum a[i] x[n-1-i].
struct LpcResult {
  std::vector<double> a;
  std::vector<double> reflection;
  double energy = 0.0;  // mean square of the frame
  double error = 0.0;   // residual power after the last stage
};

inline std::size_t default_lpc_order(double sample_rate) {
  return 2 + static_cast<std::size_t>(sample_rate / 1000.0);
}

/// Burg's lattice recursion. Each reflection coefficient minimizes the sum of
/// forward and backward residual energy, which keeps |k| < 1.
inline LpcResult burg_lpc(std::span<const double> frame, std::size_t order) {
  const std::size_t n = frame.size();
  if (n <= order) throw ParameterError("burg_lpc needs more than " + std::to_string(order) + " samples");
  LpcResult r;
  for (double x : frame) r.energy += x * x;
  r.energy /= static_cast<double>(n);
  if (!std::isfinite(r.energy)) throw EstimationError("burg_lpc: non-finite frame");
  if (r.energy == 0.0) throw EstimationError("burg_lpc: zero-energy frame");
  r.error = r.energy;
  std::vector<double> f(frame.begin(), frame.end()), b = f;
  std::vector<double> prev;
  r.a.reserve(order);
  for (std::size_t m = 1; m <= order; ++m) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = m; i < n; ++i) {
      num += f[i] * b[i - 1];
      den += f[i] * f[i] + b[i - 1] * b[i - 1];
    }
    // A perfectly predicted frame leaves nothing to fit; later stages are zero.
    const double k = den > 0.0 ? -2.0 * num / den : 0.0;
    prev = r.a;
    r.a.push_back(k);
    for (std::size_t i = 0; i + 1 < m; ++i) r.a[i] = prev[i] + k * prev[m - 2 - i];
    for (std::size_t i = n - 1; i >= m; --i) {
      const double fi = f[i], bi = b[i - 1];
      f[i] = fi + k * bi;
      b[i] = bi + k * fi;
    }
    r.reflection.push_back(k);
    r.error *= 1.0 - k * k;
  }
  return r;
}

struct Formant {
  double frequency = 0.0;  // Hz
  double bandwidth = 0.0;  // Hz
};

struct FormantGate {
  double min_hz = 90.0;
  double nyquist_margin_hz = 50.0;
  double max_bandwidth_hz = 400.0;
  std::size_t max_formants = 4;
};

/// Roots of z^p + a0 z^(p-1) + ... + a(p-1), via eigenvalues of the companion matrix.
inline std::vector<std::complex<double>> lpc_roots(std::span<const double> a) {
  const auto p = static_cast<Eigen::Index>(a.size());
  if (p == 0) return {};
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) c(0, j) = -a[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) c(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
  if (es.info() != Eigen::Success) throw EstimationError("LPC root finding did not converge");
  std::vector<std::complex<double>> out(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return out;
}

/// Resonances of the LPC polynomial that look like formants, ascending.
/// An empty result marks a formantless frame.
inline std::vector<Formant> lpc_to_formants(std::span<const double> a, double sample_rate,
                                            const FormantGate& gate = {}) {
  if (!(sample_rate > 0.0)) throw ParameterError("sample rate must be positive");
  std::vector<Formant> out;
  const double hi = sample_rate / 2.0 - gate.nyquist_margin_hz;
  for (const auto& z : lpc_roots(a)) {
    if (z.imag() <= 0.0) continue;
    const double f = std::arg(z) * sample_rate / (2.0 * std::numbers::pi);
    const double bw = -sample_rate / std::numbers::pi * std::log(std::abs(z));
    if (f >= gate.min_hz && f <= hi && bw < gate.max_bandwidth_hz) out.push_back({f, bw});
  }
  std::sort(out.begin(), out.end(), [](const Formant& x, const Formant& y) { return x.frequency < y.frequency; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Formant& x, const Formant& y) { return x.frequency == y.frequency; }),
            out.end());
  if (out.size() > gate.max_formants) out.resize(gate.max_formants);
  return out;
}

struct F0Options {
  double fmin = 60.0;
  double fmax = 600.0;
  double voicing_threshold = 0.3;
};

/// Samples needed for two periods of the lowest candidate pitch.
inline std::size_t min_f0_frame(double sample_rate, double fmin) {
  return static_cast<std::size_t>(std::ceil(2.0 * sample_rate / fmin));
}

/// Normalized autocorrelation pitch estimate; nullopt means unvoiced.
inline std::optional<double> estimate_f0(std::span<const double> frame, double sample_rate,
                                         const F0Options& opt = {}) {
  if (!(opt.fmin > 0.0) || opt.fmax < opt.fmin) throw ParameterError("estimate_f0 needs 0 < fmin <= fmax");
  if (!(sample_rate > 0.0)) throw ParameterError("sample rate must be positive");
  if (frame.size() < min_f0_frame(sample_rate, opt.fmin)) {
    throw ParameterError("estimate_f0 frame shorter than two periods of fmin");
  }
  const std::size_t n = frame.size();
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = frame[i] - mean;

  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(sample_rate / opt.fmax)));
  const auto hi = std::min(n - 1, static_cast<std::size_t>(std::ceil(sample_rate / opt.fmin)));
  // One extra lag on each side so the parabolic fit has neighbours.
  const std::size_t first = lo > 1 ? lo - 1 : lo, last = std::min(n - 1, hi + 1);
  std::vector<double> r(last + 1, 0.0);
  for (std::size_t tau = first; tau <= last; ++tau) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i + tau < n; ++i) {
      xy += x[i] * x[i + tau];
      xx += x[i] * x[i];
      yy += x[i + tau] * x[i + tau];
    }
    r[tau] = xx > 0.0 && yy > 0.0 ? xy / std::sqrt(xx * yy) : 0.0;
  }
  std::size_t best = lo;
  for (std::size_t tau = lo; tau <= hi; ++tau) {
    if (r[tau] > r[best]) best = tau;
  }
  if (!(r[best] >= opt.voicing_threshold)) return std::nullopt;
  // Prefer the shortest lag that is a local peak nearly as strong as the best,
  // so a period multiple does not win by noise.
  for (std::size_t tau = lo; tau < best; ++tau) {
    if (r[tau] >= 0.9 * r[best] && r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1]) {
      best = tau;
      break;
    }
  }
  double lag = static_cast<double>(best);
  if (best > first && best < last) {
    const double y0 = r[best - 1], y1 = r[best], y2 = r[best + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) lag += std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
  }
  return sample_rate / lag;
}

}  // namespace w2n
