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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "lfdcu/autodiff.hpp"
#include "lfdcu/errors.hpp"
#include "lfdcu/lowlight_sim.hpp"
#include "lfdcu/metrics.hpp"
#include "lfdcu/ops.hpp"
#include "lfdcu/unfold.hpp"

namespace lfdcu {

/// Weights of the L1, (1 - SSIM) and perceptual terms.
struct LossWeights {
  double l1 = 1.0;
  double ssim = 1.0;
  double perceptual = 0.1;

  void validate() const {
    if (!(l1 >= 0 && ssim >= 0 && perceptual >= 0))
      throw ConfigError("loss weights must be nonnegative");
  }
};

/// Optional feature-space loss Per(out, gt) plugged into the composite loss.
/// Must return a scalar Var and 0 for identical inputs.
template <typename T>
using PerceptualLoss = std::function<Var<T>(const Var<T>&, const Tensor<T>&)>;

struct TrainConfig {
  std::size_t crop_size = 32;
  std::size_t batch_size = 2;
  double lr0 = 1e-4;
  std::size_t halve_every = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Validation PSNR/SSIM cadence in epochs (the last epoch is always scored).
  std::size_t val_every = 10;

  void validate() const {
    if (crop_size < 8) throw ConfigError("crop size must be >= 8");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr0 > 0)) throw ConfigError("learning rate must be positive");
    if (halve_every < 1) throw ConfigError("halve_every must be >= 1");
  }
};

struct LossTerms {
  double total = 0, l1 = 0, ssim = 0, perceptual = 0;
};

namespace graph {

template <typename T>
Var<T> composite_loss(const Var<T>& out, const Tensor<T>& gt, const LossWeights& w,
                      const PerceptualLoss<T>* perceptual = nullptr,
                      LossTerms* terms = nullptr) {
  Var<T> loss = ops::scale(ops::l1_mean(out, gt), static_cast<T>(w.l1));
  LossTerms lt;
  lt.l1 = static_cast<double>(loss.value().item()) / (w.l1 > 0 ? w.l1 : 1.0);
  if (w.ssim > 0) {
    const Var<T> s = ops::ssim_mean(out, gt);
    lt.ssim = static_cast<double>(s.value().item());
    loss = ops::add(loss, ops::scale(ops::shift(ops::scale(s, T(-1)), T(1)),
                                     static_cast<T>(w.ssim)));
  }
  if (perceptual && *perceptual && w.perceptual > 0) {
    const Var<T> p = (*perceptual)(out, gt);
    lt.perceptual = static_cast<double>(p.value().item());
    loss = ops::add(loss, ops::scale(p, static_cast<T>(w.perceptual)));
  }
  lt.total = static_cast<double>(loss.value().item());
  if (terms) *terms = lt;
  return loss;
}

}  // namespace graph

/// lambda1 * mean|out - gt| + lambda2 * (1 - SSIM) [+ lambda3 * Per].
template <typename T>
double composite_loss(const LightField4D<T>& out, const LightField4D<T>& gt,
                      const LossWeights& w,
                      const PerceptualLoss<T>* perceptual = nullptr) {
  w.validate();
  ad::NoGradGuard guard;
  return graph::composite_loss(Var<T>::constant(out.data()), gt.data(), w, perceptual)
      .value()
      .item();
}

/// lr0 * 0.5^floor(epoch / halve_every).
inline double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(0.5, static_cast<double>(epoch / cfg.halve_every));
}

template <typename T>
struct CropPair {
  std::size_t source = 0;
  std::size_t s0 = 0, t0 = 0;
  LightField4D<T> input;
  LightField4D<T> target;
};

template <typename T>
LightField4D<T> crop_spatial(const LightField4D<T>& lf, std::size_t s0, std::size_t t0,
                             std::size_t size) {
  const Dims5 d = lf.dims();
  Tensor<T> out(Dims5{d.u, d.v, size, size, d.c});
  for (std::size_t u = 0; u < d.u; ++u)
    for (std::size_t v = 0; v < d.v; ++v)
      for (std::size_t s = 0; s < size; ++s) {
        const T* src = &lf(u, v, s0 + s, t0, 0);
        std::copy(src, src + size * d.c, &out.at(u, v, s, 0, 0));
      }
  return LightField4D<T>(std::move(out), lf.meta());
}

/// Draws batch_size samples (without replacement while the dataset allows)
/// and one random crop window per sample, shared by input and target.
template <typename T>
std::vector<CropPair<T>> sample_crops(const std::vector<Sample<T>>& data,
                                      const TrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw DataError("cannot crop from an empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<CropPair<T>> batch;
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    const std::size_t idx = order[b % order.size()];
    const auto& smp = data[idx];
    const Dims5 d = smp.input.dims();
    if (!(smp.target.dims() == d)) throw ShapeError("input/target shapes differ");
    if (d.s < cfg.crop_size || d.t < cfg.crop_size) {
      throw RangeError("crop size " + std::to_string(cfg.crop_size) +
                       " exceeds spatial size " + std::to_string(d.s) + "x" +
                       std::to_string(d.t));
    }
    std::uniform_int_distribution<std::size_t> ds(0, d.s - cfg.crop_size);
    std::uniform_int_distribution<std::size_t> dt(0, d.t - cfg.crop_size);
    const std::size_t s0 = ds(rng), t0 = dt(rng);
    batch.push_back({idx, s0, t0, crop_spatial(smp.input, s0, t0, cfg.crop_size),
                     crop_spatial(smp.target, s0, t0, cfg.crop_size)});
  }
  return batch;
}

/// Adam with bias correction over a fixed list of parameters.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  /// Parameters without an accumulated gradient are left untouched.
  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const Tensor<T>* g = params_[k].grad();
      if (!g) continue;
      Tensor<T>& w = params_[k].mutable_value();
      Tensor<T>& m = m_[k];
      Tensor<T>& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>((*g)[i]);
        const double mi = beta1_ * m[i] + (1 - beta1_) * gi;
        const double vi = beta2_ * v[i] + (1 - beta2_) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        w[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + eps_));
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<Var<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0;
  LossTerms loss;
  std::optional<double> val_psnr_db;
  std::optional<double> val_ssim;
};

inline nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch},
                   {"lr", e.lr},
                   {"loss", e.loss.total},
                   {"l1", e.loss.l1},
                   {"ssim", e.loss.ssim},
                   {"perceptual", e.loss.perceptual}};
  j["val_psnr_db"] = e.val_psnr_db ? nlohmann::json(*e.val_psnr_db) : nlohmann::json();
  j["val_ssim"] = e.val_ssim ? nlohmann::json(*e.val_ssim) : nlohmann::json();
  return j;
}

template <typename T>
struct TrainResult {
  Model<T> model;
  std::vector<EpochLog> log;
};

/// End-to-end training of `model` (deep-copied; the argument is untouched).
///
/// One epoch is ceil(N / batch_size) optimiser steps; each step averages the
/// composite loss over sample_crops(). `on_epoch` sees every log record as it
/// is produced.
template <typename T>
TrainResult<T> train(const Model<T>& initial, const std::vector<Sample<T>>& data,
                     const TrainConfig& cfg, const LossWeights& w,
                     const std::vector<std::type_identity_t<Sample<T>>>& validation = {},
                     const std::type_identity_t<PerceptualLoss<T>>* perceptual = nullptr,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  w.validate();
  if (data.empty()) throw DataError("training needs at least one sample");
  TrainResult<T> result{initial.clone(), {}};
  Model<T>& model = result.model;
  std::vector<Var<T>> params;
  model.visit([&](const std::string&, Var<T>& v) { params.push_back(v); });
  Adam<T> adam(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Rng rng(cfg.seed);
  const std::size_t steps = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr_schedule(epoch, cfg);
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batch = sample_crops(data, cfg, rng);
      model.zero_grad();
      for (const auto& pair : batch) {
        const Var<T> x = Var<T>::constant(pair.input.data());
        const auto fwd = graph::enhance(x, model);
        LossTerms terms;
        const Var<T> loss =
            graph::composite_loss(fwd.output, pair.target.data(), w, perceptual, &terms);
        if (!std::isfinite(terms.total)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
        }
        ad::backward(loss, static_cast<T>(1.0 / static_cast<double>(batch.size())));
        const double scale = 1.0 / static_cast<double>(batch.size() * steps);
        entry.loss.total += terms.total * scale;
        entry.loss.l1 += terms.l1 * scale;
        entry.loss.ssim += terms.ssim * scale;
        entry.loss.perceptual += terms.perceptual * scale;
      }
      adam.step(entry.lr);
      for (const auto& v : params)
        if (!v.value().all_finite())
          throw DivergenceError("non-finite parameter at epoch " + std::to_string(epoch));
    }
    const bool last = epoch + 1 == cfg.epochs;
    if (!validation.empty() && cfg.val_every > 0 &&
        ((epoch + 1) % cfg.val_every == 0 || last)) {
      const auto table = evaluate_dataset(model, validation, {false, 0});
      entry.val_psnr_db = table.mean.psnr_db;
      entry.val_ssim = table.mean.ssim;
    }
    if (on_epoch) on_epoch(entry);
    result.log.push_back(entry);
  }
  return result;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/- probes crossed a kink (leaky ramp, max, clamp,
  /// |x|); the function is not differentiable across them.
  std::size_t skipped = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() against central differences for every element of
/// every parameter. Relative error is |a - n| / max(|a|, |n|, floor).
template <typename T>
GradCheckReport grad_check(const std::function<Var<T>()>& fn,
                           std::vector<std::pair<std::string, Var<T>>> params,
                           double step = 1e-5, double floor = 1e-6) {
  for (auto& [_, p] : params) p.zero_grad();
  std::uint64_t base_sig = 0;
  {
    ad::BranchRecorder rec;
    const Var<T> y = fn();
    base_sig = rec.signature();
    ad::backward(y);
  }
  GradCheckReport rep;
  for (auto& [name, p] : params) {
    const Tensor<T> analytic =
        p.grad() ? *p.grad() : Tensor<T>(p.shape());
    Tensor<T>& w = p.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T orig = w[i];
      auto eval = [&](T value, std::uint64_t& sig) {
        w[i] = value;
        ad::NoGradGuard guard;
        ad::BranchRecorder rec;
        const double y = static_cast<double>(fn().value().item());
        sig = rec.signature();
        return y;
      };
      std::uint64_t sp = 0, sm = 0;
      const double fp = eval(orig + static_cast<T>(step), sp);
      const double fm = eval(orig - static_cast<T>(step), sm);
      w[i] = orig;
      if (sp != base_sig || sm != base_sig) {
        ++rep.skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2 * step);
      const double a = static_cast<double>(analytic[i]);
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = name;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace lfdcu
