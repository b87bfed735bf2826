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
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "lfdcu/errors.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/tensor.hpp"

namespace lfdcu {

using Rng = std::mt19937_64;

enum class AlphaMode { kFixed, kDynamic };

/// Low-light capture settings.
///
/// The system gain is folded into alpha. Gaussian read noise is given on the
/// 0-255 scale; the signal-dependent (shot) term has variance
/// poisson_gain * alpha * x on the [0,1] scale.
struct NoiseParams {
  AlphaMode alpha_mode = AlphaMode::kFixed;
  double alpha = 0.2;
  std::array<double, 2> alpha_range{0.1, 0.3};
  double gaussian_sigma_255 = 20.0;
  double poisson_gain = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (alpha_mode == AlphaMode::kFixed && !(alpha > 0.0)) {
      throw ConfigError("fixed alpha must be positive");
    }
    if (alpha_mode == AlphaMode::kDynamic &&
        !(alpha_range[0] > 0.0 && alpha_range[0] <= alpha_range[1])) {
      throw ConfigError("dynamic alpha range must satisfy 0 < lo <= hi");
    }
    if (!(gaussian_sigma_255 >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (!(poisson_gain >= 0.0)) throw ConfigError("poisson gain must be >= 0");
  }

  /// Fixed-illumination protocol (alpha 0.2, sigma 20).
  static NoiseParams syn_f(std::uint64_t seed = 0) {
    NoiseParams p;
    p.alpha_mode = AlphaMode::kFixed;
    p.alpha = 0.2;
    p.gaussian_sigma_255 = 20.0;
    p.seed = seed;
    return p;
  }

  /// Dynamic-illumination protocol (alpha in [0.1, 0.3], sigma 15).
  static NoiseParams syn_d(std::uint64_t seed = 0) {
    NoiseParams p;
    p.alpha_mode = AlphaMode::kDynamic;
    p.alpha_range = {0.1, 0.3};
    p.gaussian_sigma_255 = 15.0;
    p.seed = seed;
    return p;
  }
};

inline double sample_alpha(const NoiseParams& p, Rng& rng) {
  p.validate();
  if (p.alpha_mode == AlphaMode::kFixed) return p.alpha;
  const auto [lo, hi] = p.alpha_range;
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> dist(lo, hi);
  return std::min(hi, dist(rng));
}

template <typename T>
struct SimulatedCapture {
  LightField4D<T> lf;
  double alpha_used = 0.0;
};

/// alpha * x + eta before clipping, eta ~ N(0, (sigma/255)^2 + gain * alpha * x).
/// Consumes the generator exactly like simulate_lowlight.
template <typename T>
std::pair<Tensor<double>, double> simulate_lowlight_unclipped(const LightField4D<T>& lf_n,
                                                              const NoiseParams& p,
                                                              Rng& rng) {
  const double alpha = sample_alpha(p, rng);
  const double read_var = std::pow(p.gaussian_sigma_255 / 255.0, 2);
  const bool noisy = read_var > 0.0 || p.poisson_gain > 0.0;
  Tensor<double> out(lf_n.data().shape());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& src = lf_n.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = static_cast<double>(src[i]);
    if (x < 0.0 || x > 1.0) {
      throw RangeError("simulate_lowlight expects values in [0,1]");
    }
    double y = alpha * x;
    if (noisy) {
      const double var = read_var + p.poisson_gain * alpha * x;
      y += std::sqrt(var) * normal(rng);
    }
    out[i] = y;
  }
  return {std::move(out), alpha};
}

/// clip(alpha * x + eta) to [0, 1]. One alpha is drawn per light field.
template <typename T>
SimulatedCapture<T> simulate_lowlight(const LightField4D<T>& lf_n,
                                      const NoiseParams& p, Rng& rng) {
  auto [raw, alpha] = simulate_lowlight_unclipped(lf_n, p, rng);
  Tensor<T> out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = static_cast<T>(std::clamp(raw[i], 0.0, 1.0));
  return {LightField4D<T>(std::move(out), lf_n.meta()), alpha};
}

namespace detail {

template <typename T>
T bilinear(const Tensor<T>& img, double r, double c, std::size_t ch) {
  const std::size_t rows = img.dim(0), cols = img.dim(1), chans = img.dim(2);
  const double fr = std::floor(r), fc = std::floor(c);
  const double ar = r - fr, ac = c - fc;
  auto px = [&](double rr, double cc) {
    const auto ri = static_cast<std::size_t>(std::clamp(rr, 0.0, double(rows - 1)));
    const auto ci = static_cast<std::size_t>(std::clamp(cc, 0.0, double(cols - 1)));
    return static_cast<double>(img[(ri * cols + ci) * chans + ch]);
  };
  double v = (1 - ar) * (1 - ac) * px(fr, fc) + (1 - ar) * ac * px(fr, fc + 1);
  if (ar > 0) v += ar * (1 - ac) * px(fr + 1, fc) + ar * ac * px(fr + 1, fc + 1);
  return static_cast<T>(v);
}

}  // namespace detail

/// Lambertian fronto-parallel scene: view (u, v) is `base` translated by
/// disparity * (u - uc) along t and disparity * (v - vc) along s.
///
/// The output is the central crop of the base image that stays in bounds for
/// every view, so disparity 0 returns the full base image in every view.
template <typename T>
LightField4D<T> make_synthetic_scene(const Tensor<T>& base, double disparity,
                                     std::size_t U, std::size_t V) {
  if (base.rank() != 3) throw DimensionError("base image must be [rows, cols, c]");
  if (U == 0 || V == 0) throw DimensionError("angular size must be positive");
  const std::size_t rows = base.dim(0), cols = base.dim(1), chans = base.dim(2);
  const auto [uc, vc] = center_view(Dims5{U, V, 1, 1, 1});
  const double reach = static_cast<double>(
      std::max({uc, U - 1 - uc, vc, V - 1 - vc}));
  const auto margin =
      static_cast<std::size_t>(std::ceil(std::abs(disparity) * reach - 1e-12));
  if (2 * margin >= rows || 2 * margin >= cols) {
    throw RangeError("disparity shift leaves no in-bounds pixels");
  }
  const Dims5 d{U, V, rows - 2 * margin, cols - 2 * margin, chans};
  Tensor<T> out(d);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t v = 0; v < V; ++v) {
      const double dt = disparity * (double(u) - double(uc));
      const double ds = disparity * (double(v) - double(vc));
      for (std::size_t s = 0; s < d.s; ++s) {
        for (std::size_t t = 0; t < d.t; ++t) {
          const double r = double(s + margin) - ds;
          const double c = double(t + margin) - dt;
          for (std::size_t ch = 0; ch < chans; ++ch) {
            out.at(u, v, s, t, ch) =
                std::clamp(detail::bilinear(base, r, c, ch), T(0), T(1));
          }
        }
      }
    }
  }
  return LightField4D<T>(std::move(out));
}

/// Procedural test image: smooth colour gradient, a few flat shapes and a
/// mild sinusoidal texture, values within [0.05, 0.95].
template <typename T>
Tensor<T> make_base_image(std::size_t rows, std::size_t cols,
                          std::size_t chans, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Tensor<T> img(Shape{rows, cols, chans});
  std::array<double, 3> g0{}, g1{}, g2{};
  for (std::size_t c = 0; c < 3; ++c) {
    g0[c] = 0.2 + 0.6 * uni(rng);
    g1[c] = 0.4 * (uni(rng) - 0.5);
    g2[c] = 0.4 * (uni(rng) - 0.5);
  }
  const double freq = 0.2 + 0.5 * uni(rng);
  const double phase = 6.28318 * uni(rng);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < cols; ++q) {
      const double y = double(r) / double(rows), x = double(q) / double(cols);
      const double tex = 0.06 * std::sin(freq * double(r + q) + phase);
      for (std::size_t c = 0; c < chans; ++c) {
        img[(r * cols + q) * chans + c] =
            static_cast<T>(g0[c % 3] + g1[c % 3] * x + g2[c % 3] * y + tex);
      }
    }
  }
  const int shapes = 3 + static_cast<int>(uni(rng) * 4);
  for (int k = 0; k < shapes; ++k) {
    const double cy = uni(rng) * rows, cx = uni(rng) * cols;
    const double ry = (0.08 + 0.2 * uni(rng)) * rows;
    const double rx = (0.08 + 0.2 * uni(rng)) * cols;
    const bool disc = uni(rng) < 0.5;
    std::array<double, 3> colour{uni(rng), uni(rng), uni(rng)};
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t q = 0; q < cols; ++q) {
        const double dy = (double(r) - cy) / ry, dx = (double(q) - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0
                                 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < chans; ++c) {
          img[(r * cols + q) * chans + c] = static_cast<T>(colour[c % 3]);
        }
      }
    }
  }
  for (auto& x : img.values()) x = std::clamp(x, T(0.05), T(0.95));
  return img;
}

}  // namespace lfdcu
