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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lfdcu/autodiff.hpp"
#include "lfdcu/dpef.hpp"
#include "lfdcu/errors.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/ops.hpp"

namespace lfdcu {

enum class IlluminationMode {
  kSignalDependent,  // estimated from the previous enhanced result
  kDualVariable,     // carried as its own state and refined from I^{k-1}
};

inline const char* illumination_name(IlluminationMode m) {
  return m == IlluminationMode::kSignalDependent ? "signal" : "dual";
}

/// Architecture and ablation switches.
struct ModelConfig {
  std::size_t stages = 3;
  std::size_t layers = 6;
  std::size_t channels = 32;
  bool use_cdc = true;
  FeatureBlock feature_block = FeatureBlock::kDpef;
  bool share_stage_weights = false;
  IlluminationMode illumination = IlluminationMode::kSignalDependent;
  double clamp_floor = 1e-2;
  /// For sas/simplified blocks, pick the channel width whose parameter count
  /// is closest to the dpef model with `channels`.
  bool match_param_count = true;
  std::size_t views_u = 5;
  std::size_t views_v = 5;
  std::size_t image_channels = 3;

  void validate() const {
    if (stages < 1 || layers < 1 || channels < 1) {
      throw ConfigError("stages, layers and channels must all be >= 1");
    }
    if (views_u < 1 || views_v < 1) throw ConfigError("angular size must be >= 1");
    if (image_channels != 1 && image_channels != 3) {
      throw ConfigError("image channels must be 1 or 3");
    }
    if (!(clamp_floor > 0.0 && clamp_floor < 1.0)) {
      throw ConfigError("illumination floor must lie in (0,1)");
    }
  }

  std::size_t views() const { return views_u * views_v; }

  /// Trainable scalars and modules of one stage at block width `c`.
  std::size_t stage_param_count(FeatureBlock kind, std::size_t c) const {
    const std::size_t ic = image_channels;
    std::size_t n = 2;  // gamma, mu
    n += DeepModuleParams<double>::param_count(1, 1, kind, layers, c, views());
    if (use_cdc)
      n += DeepModuleParams<double>::param_count(2 * ic, ic, kind, layers, c, views());
    n += DeepModuleParams<double>::param_count(ic, ic, kind, layers, c, views());
    if (illumination == IlluminationMode::kDualVariable) n -= 1;  // no gamma
    return n;
  }

  std::size_t block_channels() const {
    if (feature_block == FeatureBlock::kDpef || !match_param_count) return channels;
    const double target = static_cast<double>(stage_param_count(FeatureBlock::kDpef, channels));
    std::size_t best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c <= 4 * channels; ++c) {
      const double gap =
          std::abs(static_cast<double>(stage_param_count(feature_block, c)) - target);
      if (gap < best_gap) {
        best_gap = gap;
        best = c;
      }
    }
    return best;
  }

  std::size_t stored_stages() const { return share_stage_weights ? 1 : stages; }

  bool operator==(const ModelConfig&) const = default;
};

/// Learnable parameters of one unfolding stage.
template <typename T>
struct StageParams {
  Var<T> gamma;   // coarse illumination interpolation
  Var<T> mu_raw;  // mu = softplus(mu_raw)
  DeepModuleParams<T> psi;    // illumination gradient, 1 -> 1 channel
  DeepModuleParams<T> phi;    // compensation, 2*C_img -> C_img (when use_cdc)
  DeepModuleParams<T> omega;  // proximal regulariser, C_img -> C_img

  static StageParams make(const ModelConfig& cfg, Rng& rng) {
    StageParams p;
    const std::size_t c = cfg.block_channels();
    const std::size_t ic = cfg.image_channels;
    p.gamma = Var<T>::parameter(Tensor<T>::scalar(T(0.5)));
    p.mu_raw = Var<T>::parameter(
        Tensor<T>::scalar(static_cast<T>(ops::softplus_inverse(0.5))));
    p.psi = DeepModuleParams<T>::make(1, 1, cfg.feature_block, cfg.layers, c,
                                      cfg.views(), rng);
    if (cfg.use_cdc) {
      p.phi = DeepModuleParams<T>::make(2 * ic, ic, cfg.feature_block, cfg.layers,
                                        c, cfg.views(), rng);
    }
    p.omega = DeepModuleParams<T>::make(ic, ic, cfg.feature_block, cfg.layers, c,
                                        cfg.views(), rng);
    return p;
  }

  T mu() const {
    return static_cast<T>(std::log1p(std::exp(static_cast<double>(mu_raw.value().item()))));
  }

  void set_mu(double mu) {
    mu_raw.mutable_value()[0] = static_cast<T>(ops::softplus_inverse(mu));
  }

  void visit(const std::string& prefix, const ModelConfig& cfg,
             const ParamVisitor<T>& fn) {
    if (cfg.illumination == IlluminationMode::kSignalDependent)
      fn(prefix + ".gamma", gamma);
    fn(prefix + ".mu_raw", mu_raw);
    psi.visit(prefix + ".psi", fn);
    if (cfg.use_cdc) phi.visit(prefix + ".phi", fn);
    omega.visit(prefix + ".omega", fn);
  }
};

/// S unfolding stages (one shared set when share_stage_weights).
template <typename T>
struct Model {
  ModelConfig config;
  std::vector<StageParams<T>> stages;

  static Model make(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.config = cfg;
    Rng rng(seed);
    for (std::size_t k = 0; k < cfg.stored_stages(); ++k)
      m.stages.push_back(StageParams<T>::make(cfg, rng));
    return m;
  }

  const StageParams<T>& stage(std::size_t k) const {
    return stages.at(config.share_stage_weights ? 0 : k);
  }
  StageParams<T>& stage(std::size_t k) {
    return stages.at(config.share_stage_weights ? 0 : k);
  }

  void visit(const ParamVisitor<T>& fn) {
    for (std::size_t k = 0; k < stages.size(); ++k)
      stages[k].visit("stage" + std::to_string(k), config, fn);
  }

  std::vector<std::pair<std::string, Var<T>>> named_parameters() {
    std::vector<std::pair<std::string, Var<T>>> out;
    visit([&](const std::string& name, Var<T>& v) { out.emplace_back(name, v); });
    return out;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Var<T>& v) { n += v.value().size(); });
    return n;
  }

  void zero_grad() {
    visit([](const std::string&, Var<T>& v) { v.zero_grad(); });
  }

  /// Deep copy into scalar type U.
  template <typename U>
  Model<U> cast() const {
    Model<U> out = Model<U>::make(config, 0);
    auto src = const_cast<Model&>(*this).named_parameters();
    auto dst = out.named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i].second.mutable_value() = src[i].second.value().template cast<U>();
    return out;
  }

  Model clone() const { return cast<T>(); }
};

/// Single-channel per-view gain map [U,V,S,T,1].
template <typename T>
struct IlluminationMap {
  Tensor<T> data;
};

/// Content-associated correction, shaped like the light field; unbounded.
template <typename T>
struct CompensationField {
  Tensor<T> data;
};

template <typename T>
struct StageState {
  LightField4D<T> lf_n;
  LightField4D<T> nu;
  std::size_t k = 0;
  /// Only used by the dual-variable illumination variant.
  Tensor<T> illumination;
};

// ---------------------------------------------------------------------------
// Graph-level stage

namespace graph {

template <typename T>
struct State {
  Var<T> x;      // LF_n^k
  Var<T> nu;     // auxiliary nu^k
  Var<T> illum;  // I^k, dual-variable mode only
  std::size_t k = 0;
};

template <typename T>
struct StageTrace {
  Var<T> coarse_illumination;
  Var<T> illumination;
  Var<T> delta;
};

inline constexpr double kMinMean = 1e-8;

template <typename T>
Var<T> coarse_illumination(const Var<T>& x_prev, const Var<T>& d,
                           const Var<T>& gamma) {
  require_same_shape(x_prev.shape(), d.shape(), "coarse_illumination");
  return ops::max_channels(ops::sub(x_prev, ops::mul_scalar(ops::sub(x_prev, d), gamma)));
}

template <typename T>
Var<T> refine_illumination(const Var<T>& tilde_i, const DeepModuleParams<T>& psi,
                           double floor) {
  return ops::clamp(ops::sub(tilde_i, deep_module(tilde_i, psi)),
                    static_cast<T>(floor), T(1));
}

template <typename T>
Var<T> compensation(const Var<T>& x_prev, const Var<T>& d,
                    const DeepModuleParams<T>& phi) {
  require_same_shape(x_prev.shape(), d.shape(), "compensation");
  const Var<T> mean_prev = ops::mean_all(x_prev);
  if (!(static_cast<double>(mean_prev.value().item()) >= kMinMean)) {
    throw DegenerateMeanError("mean of the previous estimate is below 1e-8");
  }
  const Var<T> ratio = ops::div_scalar(ops::mean_all(d), mean_prev);
  return deep_module(ops::concat_channels<T>({d, ops::mul_scalar(x_prev, ratio)}), phi);
}

/// I * (I * x_prev - d + delta); delta may be undefined (treated as zero).
template <typename T>
Var<T> data_gradient(const Var<T>& illum, const Var<T>& x_prev, const Var<T>& d,
                     const Var<T>& delta) {
  Var<T> r = ops::sub(ops::mul_bcast_channels(x_prev, illum), d);
  if (delta.defined()) r = ops::add(r, delta);
  return ops::mul_bcast_channels(r, illum);
}

template <typename T>
Var<T> optimization_update(const Var<T>& x_prev, const Var<T>& g,
                           const Var<T>& nu_prev, const Var<T>& mu) {
  return ops::sub(x_prev, ops::add(g, ops::mul_scalar(ops::sub(x_prev, nu_prev), mu)));
}

template <typename T>
Var<T> proximal_regularize(const Var<T>& x, const DeepModuleParams<T>& omega) {
  return ops::add(x, deep_module(x, omega));
}

template <typename T>
State<T> init_state(const Var<T>& d, const ModelConfig& cfg) {
  State<T> s{d, d, {}, 0};
  if (cfg.illumination == IlluminationMode::kDualVariable) {
    s.illum = ops::clamp(ops::max_channels(d), static_cast<T>(cfg.clamp_floor), T(1));
  }
  return s;
}

template <typename T>
State<T> run_stage(const State<T>& s, const Var<T>& d, const StageParams<T>& p,
                   const ModelConfig& cfg, StageTrace<T>* trace = nullptr) {
  Var<T> tilde_i, illum;
  if (cfg.illumination == IlluminationMode::kSignalDependent) {
    tilde_i = coarse_illumination(s.x, d, p.gamma);
    illum = refine_illumination(tilde_i, p.psi, cfg.clamp_floor);
  } else {
    tilde_i = s.illum;
    illum = refine_illumination(s.illum, p.psi, cfg.clamp_floor);
  }
  Var<T> delta;
  if (cfg.use_cdc) delta = compensation(s.x, d, p.phi);
  const Var<T> g = data_gradient(illum, s.x, d, delta);
  const Var<T> x = optimization_update(s.x, g, s.nu, ops::softplus(p.mu_raw));
  const Var<T> nu = proximal_regularize(x, p.omega);
  if (trace) *trace = {tilde_i, illum, delta};
  State<T> next{x, nu, {}, s.k + 1};
  if (cfg.illumination == IlluminationMode::kDualVariable) next.illum = illum;
  return next;
}

template <typename T>
struct Forward {
  Var<T> output;               // clamp(x^S) to [0,1]
  std::vector<Var<T>> stages;  // x^k for k = 1..S, unclamped
  std::vector<StageTrace<T>> traces;
};

template <typename T>
Forward<T> enhance(const Var<T>& d, const Model<T>& model) {
  const ModelConfig& cfg = model.config;
  if (model.stages.size() != cfg.stored_stages()) {
    throw ConfigError("model holds " + std::to_string(model.stages.size()) +
                      " stage parameter sets, config needs " +
                      std::to_string(cfg.stored_stages()));
  }
  const Dims5 dims = d.value().dims5();
  if (dims.u != cfg.views_u || dims.v != cfg.views_v || dims.c != cfg.image_channels) {
    throw ShapeError("light field " + shape_str(d.shape()) +
                     " does not match the model's " + std::to_string(cfg.views_u) + "x" +
                     std::to_string(cfg.views_v) + " views with " +
                     std::to_string(cfg.image_channels) + " channels");
  }
  Forward<T> f;
  State<T> s = init_state(d, cfg);
  for (std::size_t k = 0; k < cfg.stages; ++k) {
    StageTrace<T> tr;
    s = run_stage(s, d, model.stage(k), cfg, &tr);
    f.stages.push_back(s.x);
    f.traces.push_back(tr);
  }
  f.output = ops::clamp(s.x, T(0), T(1));
  return f;
}

}  // namespace graph

// ---------------------------------------------------------------------------
// Value-level API

template <typename T>
StageState<T> init_state(const LightField4D<T>& lf_d) {
  return {lf_d, lf_d, 0, {}};
}

/// max over channels of (lf_prev - gamma * (lf_prev - lf_d)).
template <typename T>
IlluminationMap<T> coarse_illumination(const LightField4D<T>& lf_prev,
                                       const LightField4D<T>& lf_d, T gamma) {
  ad::NoGradGuard guard;
  return {graph::coarse_illumination(Var<T>::constant(lf_prev.data()),
                                     Var<T>::constant(lf_d.data()),
                                     Var<T>::constant(Tensor<T>::scalar(gamma)))
              .value()};
}

/// clamp(tilde_I - Psi(tilde_I), floor, 1).
template <typename T>
IlluminationMap<T> refine_illumination(const IlluminationMap<T>& tilde_i,
                                       const DeepModuleParams<T>& psi,
                                       double clamp_floor) {
  ad::NoGradGuard guard;
  return {graph::refine_illumination(Var<T>::constant(tilde_i.data), psi, clamp_floor)
              .value()};
}

/// Phi(concat(lf_d, mean(lf_d)/mean(lf_prev) * lf_prev)).
template <typename T>
CompensationField<T> compensation(const LightField4D<T>& lf_prev,
                                  const LightField4D<T>& lf_d,
                                  const DeepModuleParams<T>& phi) {
  ad::NoGradGuard guard;
  return {graph::compensation(Var<T>::constant(lf_prev.data()),
                              Var<T>::constant(lf_d.data()), phi)
              .value()};
}

/// The brightness-matched copy of lf_prev fed to the compensation module.
template <typename T>
Tensor<T> brightness_matched(const LightField4D<T>& lf_prev,
                             const LightField4D<T>& lf_d) {
  const double mp = mean_of(lf_prev.data());
  if (!(mp >= graph::kMinMean)) {
    throw DegenerateMeanError("mean of the previous estimate is below 1e-8");
  }
  const T ratio = static_cast<T>(mean_of(lf_d.data()) / mp);
  Tensor<T> out = lf_prev.data();
  for (auto& v : out.values()) v *= ratio;
  return out;
}

template <typename T>
Tensor<T> data_gradient(const IlluminationMap<T>& illum,
                        const LightField4D<T>& lf_prev,
                        const LightField4D<T>& lf_d,
                        const CompensationField<T>& delta) {
  ad::NoGradGuard guard;
  return graph::data_gradient(Var<T>::constant(illum.data),
                              Var<T>::constant(lf_prev.data()),
                              Var<T>::constant(lf_d.data()),
                              Var<T>::constant(delta.data))
      .value();
}

/// lf_prev - (g + mu * (lf_prev - nu_prev)), unclamped.
template <typename T>
LightField4D<T> optimization_update(const LightField4D<T>& lf_prev,
                                    const Tensor<T>& g,
                                    const LightField4D<T>& nu_prev, T mu) {
  ad::NoGradGuard guard;
  return LightField4D<T>(graph::optimization_update(
                             Var<T>::constant(lf_prev.data()), Var<T>::constant(g),
                             Var<T>::constant(nu_prev.data()),
                             Var<T>::constant(Tensor<T>::scalar(mu)))
                             .value());
}

/// lf_k + Omega(lf_k).
template <typename T>
Tensor<T> proximal_regularize(const Tensor<T>& lf_k,
                              const DeepModuleParams<T>& omega) {
  ad::NoGradGuard guard;
  return graph::proximal_regularize(Var<T>::constant(lf_k), omega).value();
}

template <typename T>
StageState<T> run_stage(const StageState<T>& state, const LightField4D<T>& lf_d,
                        const StageParams<T>& params, const ModelConfig& cfg) {
  if (state.k >= cfg.stages) throw ConfigError("stage index past the last stage");
  ad::NoGradGuard guard;
  graph::State<T> s{Var<T>::constant(state.lf_n.data()),
                    Var<T>::constant(state.nu.data()), {}, state.k};
  if (cfg.illumination == IlluminationMode::kDualVariable) {
    s.illum = state.illumination.size() == lf_d.data().size() / lf_d.dims().c
                  ? Var<T>::constant(state.illumination)
                  : graph::init_state(Var<T>::constant(lf_d.data()), cfg).illum;
  }
  const auto next = graph::run_stage(s, Var<T>::constant(lf_d.data()), params, cfg);
  StageState<T> out{LightField4D<T>(next.x.value()), LightField4D<T>(next.nu.value()),
                    next.k, {}};
  if (next.illum.defined()) out.illumination = next.illum.value();
  return out;
}

template <typename T>
struct EnhanceResult {
  LightField4D<T> output;
  /// clamp(LF_n^k) for k = 1..S.
  std::vector<LightField4D<T>> stage_outputs;
  /// delta of the final stage (zeros when compensation is disabled).
  Tensor<T> final_delta;
};

template <typename T>
EnhanceResult<T> enhance(const LightField4D<T>& lf_d, const Model<T>& model) {
  ad::NoGradGuard guard;
  const auto f = graph::enhance(Var<T>::constant(lf_d.data()), model);
  EnhanceResult<T> r;
  r.output = LightField4D<T>(f.output.value(), lf_d.meta());
  for (const auto& x : f.stages) {
    Tensor<T> c = x.value();
    for (auto& v : c.values()) v = std::clamp(v, T(0), T(1));
    r.stage_outputs.emplace_back(std::move(c));
  }
  const auto& last = f.traces.back().delta;
  r.final_delta = last.defined() ? last.value() : Tensor<T>(lf_d.data().shape());
  return r;
}

}  // namespace lfdcu
