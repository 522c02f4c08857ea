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

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "w2n/errors.hpp"

namespace w2n::dsp {

using Complex = std::complex<double>;

/// Real-input FFT of one fixed length backed by FFTW. Plans are built with
/// FFTW_ESTIMATE, so results do not depend on timing measurements.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2) throw ParameterError("FFT length must be >= 2");
    time_ = fftw_alloc_real(n);
    freq_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());  // the FFTW planner is not thread-safe
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), time_, freq_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq_, time_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(time_);
    fftw_free(freq_);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// x is zero-padded (or must not exceed) to n; out gets n/2+1 bins.
  void forward(std::span<const double> x, std::span<Complex> out) {
    if (x.size() > n_ || out.size() != bins()) throw DimensionError("RealFft::forward size mismatch");
    std::copy(x.begin(), x.end(), time_);
    std::fill(time_ + x.size(), time_ + n_, 0.0);
    fftw_execute(forward_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = {freq_[k][0], freq_[k][1]};
  }

  /// Inverse of forward, including the 1/n scaling.
  void inverse(std::span<const Complex> spec, std::span<double> out) {
    if (spec.size() != bins() || out.size() != n_) throw DimensionError("RealFft::inverse size mismatch");
    for (std::size_t k = 0; k < bins(); ++k) {
      freq_[k][0] = spec[k].real();
      freq_[k][1] = spec[k].imag();
    }
    fftw_execute(inverse_);
    const double s = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = time_[i] * s;
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  std::size_t n_;
  double* time_ = nullptr;
  fftw_complex* freq_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

/// Per-thread cache of transforms by length.
inline RealFft& real_fft(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

}  // namespace w2n::dsp
