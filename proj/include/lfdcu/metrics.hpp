// Copyright 2026 The lfdcu Authors.
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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lfdcu/errors.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/ops.hpp"
#include "lfdcu/tensor.hpp"
#include "lfdcu/unfold.hpp"

namespace lfdcu {

/// PSNR reported for identical inputs.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) pooled over every element; peak value 1.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

template <typename T>
double psnr(const LightField4D<T>& a, const LightField4D<T>& b) {
  return psnr(a.data(), b.data());
}

/// Mean SSIM over views and channels. Accepts [S,T,C] images or 5-axis
/// light-field arrays.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const ops::SsimParams& p = {}) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.rank() == 3) {
    const Shape s{1, 1, a.dim(0), a.dim(1), a.dim(2)};
    return ops::detail::ssim_fields(Tensor<T>(s, a.storage()), Tensor<T>(s, b.storage()),
                                    p, nullptr);
  }
  return ops::detail::ssim_fields(a, b, p, nullptr);
}

template <typename T>
double ssim(const LightField4D<T>& a, const LightField4D<T>& b) {
  return ssim(a.data(), b.data());
}

/// Top-k singular values (nonincreasing) and their natural logs.
struct Spectrum {
  std::vector<double> values;
  std::vector<double> logs;
};

inline Spectrum svd_spectrum(const Eigen::MatrixXd& m, std::size_t k) {
  const auto limit = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  if (k > limit) {
    throw RangeError("requested " + std::to_string(k) + " singular values from a " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " matrix");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  Spectrum out;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = std::max(0.0, sv(static_cast<Eigen::Index>(i)));
    out.values.push_back(s);
    out.logs.push_back(std::log(std::max(s, std::numeric_limits<double>::min())));
  }
  return out;
}

template <typename T>
Eigen::MatrixXd to_matrix(const Tensor<T>& m) {
  if (m.rank() != 2) throw DimensionError("expected a 2-axis matrix");
  Eigen::MatrixXd out(m.dim(0), m.dim(1));
  for (std::size_t r = 0; r < m.dim(0); ++r)
    for (std::size_t c = 0; c < m.dim(1); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          static_cast<double>(m[r * m.dim(1) + c]);
  return out;
}

/// Spectrum of the grayscale centre view.
template <typename T>
Spectrum center_sai_spectrum(const LightField4D<T>& lf, std::size_t k) {
  return svd_spectrum(to_matrix(matricize_center_sai(lf)), k);
}

/// Writes "index log_sigma" lines, one per singular value.
inline void write_spectrum(std::ostream& os, const Spectrum& s) {
  os << "# index ln_sigma\n" << std::setprecision(12);
  for (std::size_t i = 0; i < s.logs.size(); ++i) os << i << ' ' << s.logs[i] << '\n';
}

/// Mean of the log singular values at indices >= n/2 of an n-value spectrum.
inline double tail_log_mean(const Spectrum& s) {
  const std::size_t start = s.logs.size() / 2;
  double acc = 0.0;
  for (std::size_t i = start; i < s.logs.size(); ++i) acc += s.logs[i];
  return acc / static_cast<double>(s.logs.size() - start);
}

template <typename T>
struct Sample {
  std::string name;
  LightField4D<T> input;   // low-light observation
  LightField4D<T> target;  // normal-light ground truth
};

struct MetricsRecord {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double input_psnr_db = 0.0;
  std::vector<double> stage_psnr_db;
  std::optional<double> perceptual;
};

struct SpectraRecord {
  std::string name;
  Spectrum input;        // LF_d
  Spectrum compensated;  // LF_d - delta^S
  Spectrum target;       // LF_gt
};

struct MetricsTable {
  std::vector<MetricsRecord> rows;
  MetricsRecord mean;
  std::vector<SpectraRecord> spectra;
};

struct EvalOptions {
  bool per_stage = true;
  /// Number of centre-view singular values to record; 0 disables spectra.
  std::size_t spectrum_k = 0;
  /// Optional learned-perceptual distance (e.g. LPIPS); none is bundled.
  std::function<double(const LightField4D<double>&, const LightField4D<double>&)>
      perceptual_metric;
};

/// Runs `enhancer(lf_d) -> EnhanceResult` on every sample and scores it.
template <typename T, typename Enhancer>
  requires std::invocable<Enhancer&, const LightField4D<T>&>
MetricsTable evaluate_dataset(Enhancer&& enhancer, const std::vector<Sample<T>>& data,
                              const EvalOptions& opt = {}) {
  if (data.empty()) throw DataError("evaluate_dataset needs at least one sample");
  MetricsTable table;
  table.mean.name = "mean";
  for (const auto& smp : data) {
    const EnhanceResult<T> r = enhancer(smp.input);
    MetricsRecord rec;
    rec.name = smp.name;
    rec.psnr_db = psnr(r.output, smp.target);
    rec.ssim = ssim(r.output, smp.target);
    rec.input_psnr_db = psnr(smp.input, smp.target);
    if (opt.perceptual_metric)
      rec.perceptual = opt.perceptual_metric(r.output.template cast<double>(),
                                             smp.target.template cast<double>());
    if (opt.per_stage)
      for (const auto& st : r.stage_outputs) rec.stage_psnr_db.push_back(psnr(st, smp.target));
    if (opt.spectrum_k > 0) {
      Tensor<T> comp = smp.input.data();
      if (r.final_delta.same_shape(comp))
        for (std::size_t i = 0; i < comp.size(); ++i) comp[i] -= r.final_delta[i];
      table.spectra.push_back({smp.name,
                               center_sai_spectrum(smp.input, opt.spectrum_k),
                               center_sai_spectrum(LightField4D<T>(std::move(comp)),
                                                   opt.spectrum_k),
                               center_sai_spectrum(smp.target, opt.spectrum_k)});
    }
    table.rows.push_back(std::move(rec));
  }
  const double n = static_cast<double>(table.rows.size());
  for (const auto& r : table.rows) {
    table.mean.psnr_db += r.psnr_db / n;
    table.mean.ssim += r.ssim / n;
    table.mean.input_psnr_db += r.input_psnr_db / n;
    if (r.perceptual) table.mean.perceptual = table.mean.perceptual.value_or(0.0) + *r.perceptual / n;
    if (table.mean.stage_psnr_db.size() < r.stage_psnr_db.size())
      table.mean.stage_psnr_db.resize(r.stage_psnr_db.size(), 0.0);
    for (std::size_t k = 0; k < r.stage_psnr_db.size(); ++k)
      table.mean.stage_psnr_db[k] += r.stage_psnr_db[k] / n;
  }
  return table;
}

template <typename T>
MetricsTable evaluate_dataset(const Model<T>& model, const std::vector<Sample<T>>& data,
                              const EvalOptions& opt = {}) {
  return evaluate_dataset<T>([&](const LightField4D<T>& x) { return enhance(x, model); },
                             data, opt);
}

/// Comma-separated table with a header and a trailing "mean" row.
inline void write_csv(std::ostream& os, const MetricsTable& t) {
  std::size_t stages = 0;
  for (const auto& r : t.rows) stages = std::max(stages, r.stage_psnr_db.size());
  const bool per = t.mean.perceptual.has_value();
  os << "name,psnr_db,ssim,input_psnr_db";
  if (per) os << ",perceptual";
  for (std::size_t k = 0; k < stages; ++k) os << ",stage" << k + 1 << "_psnr_db";
  os << '\n' << std::setprecision(10);
  auto row = [&](const MetricsRecord& r) {
    os << r.name << ',' << r.psnr_db << ',' << r.ssim << ',' << r.input_psnr_db;
    if (per) os << ',' << r.perceptual.value_or(0.0);
    for (std::size_t k = 0; k < stages; ++k) {
      os << ',';
      if (k < r.stage_psnr_db.size()) os << r.stage_psnr_db[k];
    }
    os << '\n';
  };
  for (const auto& r : t.rows) row(r);
  row(t.mean);
}

inline nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j{{"name", r.name},
                   {"psnr_db", r.psnr_db},
                   {"ssim", r.ssim},
                   {"input_psnr_db", r.input_psnr_db},
                   {"stage_psnr_db", r.stage_psnr_db}};
  if (r.perceptual) j["perceptual"] = *r.perceptual;
  return j;
}

/// One JSON object per line: every row, then the mean.
inline void write_jsonl(std::ostream& os, const MetricsTable& t) {
  for (const auto& r : t.rows) os << to_json(r).dump() << '\n';
  os << to_json(t.mean).dump() << '\n';
}

}  // namespace lfdcu
