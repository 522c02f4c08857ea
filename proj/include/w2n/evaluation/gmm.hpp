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
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "w2n/errors.hpp"
#include "w2n/numerics/tensor.hpp"

namespace w2n {

inline constexpr double kVarianceFloor = 1.0;  // Hz^2

/// Univariate Gaussian mixture.
struct GmmModel {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t kg() const { return weights.size(); }

  double log_pdf(double x) const {
    double mx = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> terms;
    terms.resize(kg());
    for (std::size_t j = 0; j < kg(); ++j) {
      const double d = x - means[j];
      terms[j] = std::log(weights[j]) - 0.5 * (std::log(2.0 * std::numbers::pi * variances[j]) + d * d / variances[j]);
      mx = std::max(mx, terms[j]);
    }
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
  }
  double pdf(double x) const { return std::exp(log_pdf(x)); }

  double log_likelihood(std::span<const double> xs) const {
    double ll = 0.0;
    for (double x : xs) ll += log_pdf(x);
    return ll;
  }

  double sample(Rng& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    std::size_t j = 0;
    for (; j + 1 < kg(); ++j) {
      acc += weights[j];
      if (u < acc) break;
    }
    return means[j] + std::sqrt(variances[j]) * rng.normal();
  }

  void validate() const {
    if (kg() == 0 || means.size() != kg() || variances.size() != kg()) throw ContractError("malformed GMM");
    double s = 0.0;
    for (std::size_t j = 0; j < kg(); ++j) {
      if (!(weights[j] >= 0.0) || !(variances[j] >= kVarianceFloor) || !std::isfinite(means[j])) {
        throw ContractError("GMM component " + std::to_string(j) + " out of range");
      }
      s += weights[j];
    }
    if (std::abs(s - 1.0) > 1e-9) throw ContractError("GMM weights sum to " + std::to_string(s));
  }
};

struct EmOptions {
  std::size_t max_iters = 200;
  double tol = 1e-6;  // on the per-sample log-likelihood
  std::size_t n_init = 3;
  std::uint64_t seed = 0;
};

struct GmmFit {
  GmmModel model;
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t iterations = 0;
  std::vector<double> ll_trace;  // total log-likelihood at every E-step
};

namespace detail {

/// k-means++ style seeding: first centre uniform, the rest drawn in
/// proportion to squared distance from the nearest chosen centre.
inline GmmModel seed_gmm(std::span<const double> xs, std::size_t kg, Rng& rng) {
  const std::size_t n = xs.size();
  double mean = 0.0, var = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  for (double x : xs) var += (x - mean) * (x - mean);
  var = std::max(var / static_cast<double>(n), kVarianceFloor);

  GmmModel g;
  g.means.push_back(xs[rng.below(n)]);
  std::vector<double> d2(n);
  while (g.means.size() < kg) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : g.means) best = std::min(best, (xs[i] - c) * (xs[i] - c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = rng.below(n);
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      for (pick = 0; pick + 1 < n; ++pick) {
        acc += d2[pick];
        if (u < acc) break;
      }
    }
    g.means.push_back(xs[pick]);
  }
  g.weights.assign(kg, 1.0 / static_cast<double>(kg));
  g.variances.assign(kg, var);
  return g;
}

inline GmmFit run_em(std::span<const double> xs, GmmModel g, const EmOptions& opt) {
  const std::size_t n = xs.size(), kg = g.kg();
  const double nd = static_cast<double>(n);
  std::vector<double> resp(n * kg);
  GmmFit fit;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0;; ++it) {
    // E-step
    double ll = 0.0;
    std::vector<double> logw(kg), lognorm(kg);
    for (std::size_t j = 0; j < kg; ++j) {
      logw[j] = std::log(g.weights[j]);
      lognorm[j] = -0.5 * std::log(2.0 * std::numbers::pi * g.variances[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < kg; ++j) {
        const double d = xs[i] - g.means[j];
        resp[i * kg + j] = logw[j] + lognorm[j] - 0.5 * d * d / g.variances[j];
        mx = std::max(mx, resp[i * kg + j]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < kg; ++j) s += std::exp(resp[i * kg + j] - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (std::size_t j = 0; j < kg; ++j) resp[i * kg + j] = std::exp(resp[i * kg + j] - lse);
    }
    if (!std::isfinite(ll)) throw EstimationError("EM log-likelihood is not finite");
    fit.ll_trace.push_back(ll);
    fit.iterations = it;
    if (it >= opt.max_iters || (it > 0 && (ll - prev) / nd < opt.tol)) {
      fit.log_likelihood = ll;
      break;
    }
    prev = ll;
    // M-step; a component that lost all mass keeps its previous shape.
    for (std::size_t j = 0; j < kg; ++j) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * kg + j];
        sx += resp[i * kg + j] * xs[i];
      }
      g.weights[j] = nk / nd;
      if (nk <= 0.0) continue;
      g.means[j] = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = xs[i] - g.means[j];
        sv += resp[i * kg + j] * d * d;
      }
      g.variances[j] = std::max(sv / nk, kVarianceFloor);
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  fit.model = std::move(g);
  const double params = 3.0 * static_cast<double>(kg) - 1.0;
  fit.bic = -2.0 * fit.log_likelihood + params * std::log(nd);
  return fit;
}

inline void check_values(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw EstimationError("non-finite value in GMM data");
  }
}

}  // namespace detail

/// EM for a fixed component count; the best of opt.n_init seeded starts.
inline GmmFit fit_gmm_k(std::span<const double> xs, std::size_t kg, const EmOptions& opt = {}) {
  if (kg == 0) throw ParameterError("GMM needs at least one component");
  if (xs.size() < 10 * kg) {
    throw EstimationError("GMM with " + std::to_string(kg) + " components needs at least " +
                          std::to_string(10 * kg) + " values, got " + std::to_string(xs.size()));
  }
  detail::check_values(xs);
  Rng rng(mix_seed(opt.seed, kg));
  GmmFit best;
  for (std::size_t r = 0; r < std::max<std::size_t>(opt.n_init, 1); ++r) {
    GmmFit f = detail::run_em(xs, detail::seed_gmm(xs, kg, rng), opt);
    if (r == 0 || f.log_likelihood > best.log_likelihood) best = std::move(f);
  }
  return best;
}

struct GmmSelection {
  GmmFit best;
  std::vector<GmmFit> candidates;  // one per kg in [k_min, k_max]
};

/// Fits every kg in [k_min, k_max] and keeps the lowest BIC.
inline GmmSelection select_gmm(std::span<const double> xs, std::size_t k_min = 1, std::size_t k_max = 8,
                               const EmOptions& opt = {}) {
  if (k_min == 0 || k_max < k_min) throw ParameterError("bad GMM candidate range");
  if (xs.size() < 10 * k_max) {
    throw EstimationError("GMM selection up to " + std::to_string(k_max) + " components needs at least " +
                          std::to_string(10 * k_max) + " values, got " + std::to_string(xs.size()));
  }
  GmmSelection sel;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    sel.candidates.push_back(fit_gmm_k(xs, k, opt));
    if (k == k_min || sel.candidates.back().bic < sel.best.bic) sel.best = sel.candidates.back();
  }
  return sel;
}

inline GmmModel fit_gmm(std::span<const double> xs, std::size_t k_min = 1, std::size_t k_max = 8,
                        const EmOptions& opt = {}) {
  return select_gmm(xs, k_min, k_max, opt).best.model;
}

struct KlEstimate {
  double value = 0.0;  // nats
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double std_error = 0.0;
};

/// Monte Carlo KL(f || g): mean of log f(x) - log g(x) over x ~ f.
inline KlEstimate gmm_kl_mc(const GmmModel& f, const GmmModel& g, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw ParameterError("gmm_kl_mc needs at least 1000 samples");
  f.validate();
  g.validate();
  Rng rng(seed);
  // Welford keeps the variance accurate when the ratio is nearly constant.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x = f.sample(rng);
    const double d = f.log_pdf(x) - g.log_pdf(x);
    if (!std::isfinite(d)) throw EstimationError("non-finite density ratio at x=" + std::to_string(x));
    const double delta = d - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (d - mean);
  }
  const double n = static_cast<double>(n_samples);
  return {mean, n_samples, seed, std::sqrt(m2 / (n - 1.0) / n)};
}

}  // namespace w2n
