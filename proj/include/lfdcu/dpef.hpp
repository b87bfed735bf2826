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
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lfdcu/autodiff.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/lowlight_sim.hpp"
#include "lfdcu/ops.hpp"

namespace lfdcu {

using ad::Var;

inline constexpr double kLeakySlope = 0.2;

enum class Activation { kLeaky, kNone };

/// Which feature-extraction block the dense stacks are built from.
enum class FeatureBlock {
  kDpef,        // four plane convs + EPI boost + ray fusion
  kSas,         // spatial conv followed by angular conv
  kSimplified,  // four plane convs only
};

inline const char* feature_block_name(FeatureBlock b) {
  switch (b) {
    case FeatureBlock::kDpef: return "dpef";
    case FeatureBlock::kSas: return "sas";
    case FeatureBlock::kSimplified: return "simplified";
  }
  return "?";
}

/// Visitor over named trainable tensors.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Var<T>&)>;

template <typename T>
struct ConvParams {
  Var<T> weight;  // [kh, kw, cin, cout]
  Var<T> bias;    // [cout]

  static ConvParams zeros(std::size_t k, std::size_t cin, std::size_t cout) {
    return {Var<T>::parameter(Tensor<T>(Shape{k, k, cin, cout})),
            Var<T>::parameter(Tensor<T>(Shape{cout}))};
  }

  /// He-normal weights for a leaky ramp, scaled by `gain`; zero bias.
  static ConvParams random(std::size_t k, std::size_t cin, std::size_t cout,
                           Rng& rng, double gain = 1.0) {
    ConvParams p = zeros(k, cin, cout);
    const double fan_in = static_cast<double>(k * k * cin);
    const double sd =
        gain * std::sqrt(2.0 / (fan_in * (1.0 + kLeakySlope * kLeakySlope)));
    std::normal_distribution<double> normal(0.0, sd);
    for (auto& w : p.weight.mutable_value().values()) w = static_cast<T>(normal(rng));
    return p;
  }

  /// Identity 1x1 or centre-tap kernel (cin == cout), zero bias.
  static ConvParams identity(std::size_t k, std::size_t c) {
    ConvParams p = zeros(k, c, c);
    const std::size_t centre = (k / 2) * k + k / 2;
    for (std::size_t i = 0; i < c; ++i)
      p.weight.mutable_value()[(centre * c + i) * c + i] = T(1);
    return p;
  }

  std::size_t in_channels() const { return weight.shape()[2]; }
  std::size_t out_channels() const { return weight.shape()[3]; }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
};

inline std::size_t conv_param_count(std::size_t k, std::size_t cin,
                                    std::size_t cout) {
  return k * k * cin * cout + cout;
}

/// Parameters of one feature block. Which convolutions exist depends on kind:
/// dpef uses all of them, sas only spatial/angular, simplified drops boost,
/// mix and beta.
template <typename T>
struct DpefParams {
  FeatureBlock kind = FeatureBlock::kDpef;
  std::size_t channels = 0;
  ConvParams<T> spatial, angular, epi_h, epi_v;
  ConvParams<T> boost;  // 1x1
  ConvParams<T> mix;    // 1x1, applied to the ray-fused feature
  ConvParams<T> fuse;   // 1x1 output reduction
  Var<T> beta;          // [views]

  static DpefParams make(FeatureBlock kind, std::size_t channels,
                         std::size_t views, Rng& rng) {
    DpefParams p;
    p.kind = kind;
    p.channels = channels;
    const std::size_t C = channels;
    p.spatial = ConvParams<T>::random(3, C, C, rng);
    p.angular = ConvParams<T>::random(3, C, C, rng);
    if (kind == FeatureBlock::kSas) return p;
    p.epi_h = ConvParams<T>::random(3, C, C, rng);
    p.epi_v = ConvParams<T>::random(3, C, C, rng);
    if (kind == FeatureBlock::kDpef) {
      p.boost = ConvParams<T>::random(1, C, C, rng);
      p.mix = ConvParams<T>::random(1, C, C, rng);
      p.fuse = ConvParams<T>::random(1, 6 * C, C, rng);
      p.beta = Var<T>::parameter(
          Tensor<T>(Shape{views}, static_cast<T>(1.0 / static_cast<double>(views))));
    } else {
      p.fuse = ConvParams<T>::random(1, 4 * C, C, rng);
    }
    return p;
  }

  static std::size_t param_count(FeatureBlock kind, std::size_t C,
                                 std::size_t views) {
    const std::size_t plane = conv_param_count(3, C, C);
    switch (kind) {
      case FeatureBlock::kSas: return 2 * plane;
      case FeatureBlock::kSimplified: return 4 * plane + conv_param_count(1, 4 * C, C);
      case FeatureBlock::kDpef:
        return 4 * plane + 2 * conv_param_count(1, C, C) +
               conv_param_count(1, 6 * C, C) + views;
    }
    return 0;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    spatial.visit(prefix + ".spatial", fn);
    angular.visit(prefix + ".angular", fn);
    if (kind == FeatureBlock::kSas) return;
    epi_h.visit(prefix + ".epi_h", fn);
    epi_v.visit(prefix + ".epi_v", fn);
    if (kind == FeatureBlock::kDpef) {
      boost.visit(prefix + ".boost", fn);
      mix.visit(prefix + ".mix", fn);
    }
    fuse.visit(prefix + ".fuse", fn);
    if (kind == FeatureBlock::kDpef) fn(prefix + ".beta", beta);
  }
};

/// L feature blocks with dense skips. Layer l (0-based) for l >= 1 sees the
/// stack input and all previous outputs, reduced to C channels by
/// reduce[l - 1]; layer 0 takes the stack input directly.
template <typename T>
struct DenseStackParams {
  std::vector<DpefParams<T>> layers;
  std::vector<ConvParams<T>> reduce;

  static DenseStackParams make(FeatureBlock kind, std::size_t layers,
                               std::size_t channels, std::size_t views,
                               Rng& rng) {
    DenseStackParams p;
    for (std::size_t l = 0; l < layers; ++l) {
      if (l > 0) p.reduce.push_back(ConvParams<T>::random(1, (l + 1) * channels, channels, rng));
      p.layers.push_back(DpefParams<T>::make(kind, channels, views, rng));
    }
    return p;
  }

  static std::size_t param_count(FeatureBlock kind, std::size_t L,
                                 std::size_t C, std::size_t views) {
    std::size_t n = L * DpefParams<T>::param_count(kind, C, views);
    for (std::size_t l = 1; l < L; ++l) n += conv_param_count(1, (l + 1) * C, C);
    return n;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (l > 0) reduce[l - 1].visit(prefix + ".reduce" + std::to_string(l), fn);
      layers[l].visit(prefix + ".layer" + std::to_string(l), fn);
    }
  }
};

/// A deep module (illumination gradient, compensation or regulariser):
/// 3x3 spatial lift to C channels, dense stack, 3x3 spatial projection.
template <typename T>
struct DeepModuleParams {
  ConvParams<T> lift;
  DenseStackParams<T> stack;
  ConvParams<T> project;

  /// The projection starts at a tenth of the He scale so a fresh module
  /// makes a small correction.
  static DeepModuleParams make(std::size_t in, std::size_t out,
                               FeatureBlock kind, std::size_t layers,
                               std::size_t channels, std::size_t views,
                               Rng& rng) {
    DeepModuleParams p;
    p.lift = ConvParams<T>::random(3, in, channels, rng);
    p.stack = DenseStackParams<T>::make(kind, layers, channels, views, rng);
    p.project = ConvParams<T>::random(3, channels, out, rng, 0.1);
    return p;
  }

  static std::size_t param_count(std::size_t in, std::size_t out,
                                 FeatureBlock kind, std::size_t L,
                                 std::size_t C, std::size_t views) {
    return conv_param_count(3, in, C) +
           DenseStackParams<T>::param_count(kind, L, C, views) +
           conv_param_count(3, C, out);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    lift.visit(prefix + ".lift", fn);
    stack.visit(prefix + ".stack", fn);
    project.visit(prefix + ".project", fn);
  }

  /// Zeroes every weight and bias, making the module output exactly zero.
  void zero() {
    visit("", [](const std::string&, Var<T>& v) { v.mutable_value().fill(T(0)); });
  }
};

// ---------------------------------------------------------------------------
// Graph-level forward passes

namespace graph {

template <typename T>
Var<T> activate(const Var<T>& x, Activation act) {
  return act == Activation::kLeaky ? ops::leaky_relu(x, static_cast<T>(kLeakySlope)) : x;
}

template <typename T>
Var<T> conv(const Var<T>& x, const ConvParams<T>& p, Plane plane,
            Activation act = Activation::kLeaky) {
  return activate(ops::conv_plane(x, p.weight, p.bias, plane), act);
}

/// Conv(f_epih + f_epiv) with a 1x1 kernel.
template <typename T>
Var<T> epi_boost(const Var<T>& f_epih, const Var<T>& f_epiv,
                 const ConvParams<T>& p, Activation act = Activation::kLeaky) {
  return conv(ops::add(f_epih, f_epiv), p, Plane::kSpatial, act);
}

/// Conv(sum_i beta_i f_i), broadcast back to every view.
template <typename T>
Var<T> ray_fusion(const Var<T>& f, const Var<T>& beta, const ConvParams<T>& p,
                  Activation act = Activation::kLeaky) {
  const Dims5 d = f.value().dims5();
  return ops::broadcast_views(conv(ops::ray_fuse(f, beta), p, Plane::kSpatial, act),
                              d.u, d.v);
}

template <typename T>
Var<T> feature_block(const Var<T>& f, const DpefParams<T>& p) {
  if (f.value().dims5().c != p.channels) {
    throw ShapeError("feature block expects " + std::to_string(p.channels) +
                     " channels, got " + std::to_string(f.value().dims5().c));
  }
  if (p.kind == FeatureBlock::kSas) {
    return conv(conv(f, p.spatial, Plane::kSpatial), p.angular, Plane::kAngular);
  }
  const Var<T> fs = conv(f, p.spatial, Plane::kSpatial);
  const Var<T> fa = conv(f, p.angular, Plane::kAngular);
  const Var<T> fh = conv(f, p.epi_h, Plane::kEpiH);
  const Var<T> fv = conv(f, p.epi_v, Plane::kEpiV);
  if (p.kind == FeatureBlock::kSimplified) {
    return conv(ops::concat_channels<T>({fs, fa, fh, fv}), p.fuse, Plane::kSpatial);
  }
  const Var<T> fb = epi_boost(fh, fv, p.boost);
  const Var<T> fm = ray_fusion(f, p.beta, p.mix);
  return conv(ops::concat_channels<T>({fs, fa, fh, fv, fb, fm}), p.fuse,
              Plane::kSpatial);
}

template <typename T>
Var<T> dense_stack(const Var<T>& f, const DenseStackParams<T>& p) {
  std::vector<Var<T>> outs{f};
  Var<T> y = f;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Var<T> in =
        l == 0 ? f : conv(ops::concat_channels(outs), p.reduce[l - 1], Plane::kSpatial);
    y = feature_block(in, p.layers[l]);
    outs.push_back(y);
  }
  return y;
}

template <typename T>
Var<T> deep_module(const Var<T>& x, const DeepModuleParams<T>& p) {
  const Var<T> h = dense_stack(conv(x, p.lift, Plane::kSpatial), p.stack);
  return conv(h, p.project, Plane::kSpatial, Activation::kNone);
}

}  // namespace graph

// ---------------------------------------------------------------------------
// Value-level API

template <typename T>
FeatureField<T> plane_conv(const FeatureField<T>& f, Plane plane,
                           const ConvParams<T>& p,
                           Activation act = Activation::kLeaky) {
  ad::NoGradGuard guard;
  return FeatureField<T>(
      graph::conv(Var<T>::constant(f.data()), p, plane, act).value());
}

template <typename T>
FeatureField<T> epi_boost(const FeatureField<T>& f_epih,
                          const FeatureField<T>& f_epiv, const ConvParams<T>& p,
                          Activation act = Activation::kLeaky) {
  ad::NoGradGuard guard;
  return FeatureField<T>(graph::epi_boost(Var<T>::constant(f_epih.data()),
                                          Var<T>::constant(f_epiv.data()), p, act)
                             .value());
}

template <typename T>
FeatureField<T> ray_fusion(const FeatureField<T>& f, const Tensor<T>& beta,
                           const ConvParams<T>& p,
                           Activation act = Activation::kLeaky) {
  ad::NoGradGuard guard;
  return FeatureField<T>(graph::ray_fusion(Var<T>::constant(f.data()),
                                           Var<T>::constant(beta), p, act)
                             .value());
}

template <typename T>
FeatureField<T> dpef_block(const FeatureField<T>& f, const DpefParams<T>& p) {
  ad::NoGradGuard guard;
  return FeatureField<T>(graph::feature_block(Var<T>::constant(f.data()), p).value());
}

template <typename T>
FeatureField<T> dense_stack(const FeatureField<T>& f, const DenseStackParams<T>& p) {
  ad::NoGradGuard guard;
  return FeatureField<T>(graph::dense_stack(Var<T>::constant(f.data()), p).value());
}

}  // namespace lfdcu
