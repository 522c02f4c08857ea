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

#include "json.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "w2n/evaluation/analysis.hpp"
#include "w2n/evaluation/gmm.hpp"
#include "w2n/io/binary.hpp"

namespace w2n {

struct ReportOptions {
  std::size_t k_max = 8;
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  bool voiced_only = true;
  std::size_t grid_points = 256;
  EmOptions em;
};

struct ReportRow {
  std::string feature;
  std::size_t n_ref = 0;
  std::size_t n_hyp = 0;
  std::optional<GmmModel> ref_gmm;
  std::optional<GmmModel> hyp_gmm;
  std::optional<KlEstimate> kl;
  std::string note;  // why kl is missing

  std::size_t ref_kg() const { return ref_gmm ? ref_gmm->kg() : 0; }
};

struct DensityCurve {
  std::vector<double> hz;
  std::vector<double> ref;
  std::vector<double> hyp;
};

struct FormantReport {
  std::array<ReportRow, kTrackFeatures> rows;
  std::array<DensityCurve, kTrackFeatures> curves;
};

/// All present values of one feature (0 = F0 .. 4 = F4) across the corpus.
inline std::vector<double> pool_feature(std::span<const FormantTrack> tracks, std::size_t j, bool voiced_only) {
  std::vector<double> out;
  for (const auto& tr : tracks) {
    for (const auto& fr : tr.frames) {
      if (voiced_only && !fr.voiced()) continue;
      if (fr.values[j]) out.push_back(*fr.values[j]);
    }
  }
  return out;
}

namespace detail {

inline DensityCurve density_curve(const GmmModel* ref, const GmmModel* hyp, std::size_t points) {
  DensityCurve c;
  if (!ref || points < 2) return c;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const GmmModel* g : {ref, hyp}) {
    if (!g) continue;
    for (std::size_t j = 0; j < g->kg(); ++j) {
      const double sd = std::sqrt(g->variances[j]);
      lo = std::min(lo, g->means[j] - 4.0 * sd);
      hi = std::max(hi, g->means[j] + 4.0 * sd);
    }
  }
  lo = std::max(lo, 0.0);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    c.hz.push_back(x);
    c.ref.push_back(ref->pdf(x));
    c.hyp.push_back(hyp ? hyp->pdf(x) : 0.0);
  }
  return c;
}

}  // namespace detail

/// Per feature: BIC-selected GMM on the reference pool, a hypothesis GMM with
/// the same component count, and Monte Carlo KL(reference || hypothesis).
/// The candidate range shrinks to what the reference pool can support; a
/// feature without enough data gets a row with a note instead of a value.
inline FormantReport formant_report(std::span<const FormantTrack> ref, std::span<const FormantTrack> hyp,
                                    const ReportOptions& opt = {}) {
  FormantReport rep;
  for (std::size_t j = 0; j < kTrackFeatures; ++j) {
    ReportRow& row = rep.rows[j];
    row.feature = kTrackNames[j];
    const auto xr = pool_feature(ref, j, opt.voiced_only);
    const auto xh = pool_feature(hyp, j, opt.voiced_only);
    row.n_ref = xr.size();
    row.n_hyp = xh.size();
    const std::size_t k_max = std::min(opt.k_max, xr.size() / 10);
    if (k_max == 0) {
      row.note = "too few reference values";
      continue;
    }
    EmOptions em = opt.em;
    em.seed = mix_seed(opt.seed, j);
    row.ref_gmm = select_gmm(xr, 1, k_max, em).best.model;
    if (xh.size() < 10 * row.ref_kg()) {
      row.note = "too few hypothesis values";
    } else {
      row.hyp_gmm = fit_gmm_k(xh, row.ref_kg(), em).model;
      row.kl = gmm_kl_mc(*row.ref_gmm, *row.hyp_gmm, opt.n_samples, mix_seed(opt.seed, 100 + j));
    }
    rep.curves[j] = detail::density_curve(row.ref_gmm ? &*row.ref_gmm : nullptr,
                                          row.hyp_gmm ? &*row.hyp_gmm : nullptr, opt.grid_points);
  }
  return rep;
}

inline std::string report_tsv(const FormantReport& rep) {
  std::string out = "feature\tref_kg\tkl_nats\tstderr\tn_samples\tseed\tn_ref\tn_hyp\n";
  char buf[256];
  for (const auto& r : rep.rows) {
    if (r.kl) {
      std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\t%zu\t%llu\t%zu\t%zu\n", r.feature.c_str(), r.ref_kg(),
                    r.kl->value, r.kl->std_error, r.kl->n_samples, static_cast<unsigned long long>(r.kl->seed),
                    r.n_ref, r.n_hyp);
    } else {
      std::snprintf(buf, sizeof buf, "%s\t%zu\tnan\tnan\t0\t0\t%zu\t%zu\n", r.feature.c_str(), r.ref_kg(), r.n_ref,
                    r.n_hyp);
    }
    out += buf;
  }
  return out;
}

inline nlohmann::json gmm_json(const GmmModel& g) {
  return {{"weights", g.weights}, {"means", g.means}, {"variances", g.variances}};
}

inline nlohmann::json report_json(const FormantReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json j{{"feature", r.feature}, {"ref_kg", r.ref_kg()}, {"n_ref", r.n_ref}, {"n_hyp", r.n_hyp}};
    if (r.ref_gmm) j["ref_gmm"] = gmm_json(*r.ref_gmm);
    if (r.hyp_gmm) j["hyp_gmm"] = gmm_json(*r.hyp_gmm);
    if (r.kl) {
      j["kl_nats"] = r.kl->value;
      j["stderr"] = r.kl->std_error;
      j["n_samples"] = r.kl->n_samples;
      j["seed"] = r.kl->seed;
    } else {
      j["kl_nats"] = nullptr;
      j["note"] = r.note;
    }
    rows.push_back(std::move(j));
  }
  return {{"kl_direction", "ref||hyp"}, {"rows", rows}};
}

/// report.tsv, report.json and density_<feature>.tsv (hz, ref, hyp) under dir.
inline void write_report(const FormantReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::filesystem::path& p, const std::string& s) {
    io::write_file(p, std::vector<std::uint8_t>(s.begin(), s.end()));
  };
  put(dir / "report.tsv", report_tsv(rep));
  put(dir / "report.json", report_json(rep).dump(2) + "\n");
  char buf[128];
  for (std::size_t j = 0; j < kTrackFeatures; ++j) {
    std::string s = "hz\tref\thyp\n";
    const auto& c = rep.curves[j];
    for (std::size_t i = 0; i < c.hz.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.3f\t%.9g\t%.9g\n", c.hz[i], c.ref[i], c.hyp[i]);
      s += buf;
    }
    put(dir / (std::string("density_") + kTrackNames[j] + ".tsv"), s);
  }
}

}  // namespace w2n
