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

#include "lfdcu/lowlight_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace lfdcu {
namespace {

struct Moments {
  double mean = 0, sd = 0;
};

Moments moments(const Tensor<double>& t) {
  long double s = 0, ss = 0;
  for (double v : t.values()) s += v;
  const long double m = s / t.size();
  for (double v : t.values()) ss += (v - m) * (v - m);
  return {static_cast<double>(m), static_cast<double>(std::sqrt(ss / (t.size() - 1)))};
}

LightField4D<double> constant_lf(const Shape& shape, double value) {
  return make_lightfield(Tensor<double>(shape, value), true);
}

TEST(SampleAlpha, FixedReturnsAlphaExactly) {
  Rng rng(1);
  EXPECT_EQ(sample_alpha(NoiseParams::syn_f(), rng), 0.2);
}

TEST(SampleAlpha, DynamicWithinRange) {
  Rng rng(2);
  const NoiseParams p = NoiseParams::syn_d();
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double a = sample_alpha(p, rng);
    ASSERT_GE(a, 0.1);
    ASSERT_LE(a, 0.3);
    sum += a;
  }
  // Uniform on [0.1, 0.3]: mean 0.2, sd of the mean 0.0577/sqrt(n).
  EXPECT_NEAR(sum / n, 0.2, 1e-3);
}

TEST(SampleAlpha, DegenerateRange) {
  NoiseParams p = NoiseParams::syn_d();
  p.alpha_range = {0.2, 0.2};
  Rng rng(3);
  EXPECT_EQ(sample_alpha(p, rng), 0.2);
}

TEST(SampleAlpha, ReproducibleFromSeed) {
  const NoiseParams p = NoiseParams::syn_d();
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_alpha(p, a), sample_alpha(p, b));
}

TEST(NoiseParams, Validation) {
  NoiseParams p;
  p.alpha = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = NoiseParams::syn_d();
  p.alpha_range = {0.3, 0.1};
  EXPECT_THROW(p.validate(), ConfigError);
  p.alpha_range = {0.0, 0.1};
  EXPECT_THROW(p.validate(), ConfigError);
  p = NoiseParams::syn_f();
  p.gaussian_sigma_255 = -1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = NoiseParams::syn_f();
  p.poisson_gain = -1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Protocols, FixedAndDynamicSettings) {
  const auto f = NoiseParams::syn_f();
  EXPECT_EQ(f.alpha_mode, AlphaMode::kFixed);
  EXPECT_EQ(f.alpha, 0.2);
  EXPECT_EQ(f.gaussian_sigma_255, 20.0);
  const auto d = NoiseParams::syn_d();
  EXPECT_EQ(d.alpha_mode, AlphaMode::kDynamic);
  EXPECT_EQ(d.alpha_range[0], 0.1);
  EXPECT_EQ(d.alpha_range[1], 0.3);
  EXPECT_EQ(d.gaussian_sigma_255, 15.0);
}

TEST(Simulate, NoiselessIdentity) {
  std::mt19937_64 g(5);
  const auto lf = make_lightfield(oracle::random_tensor({3, 3, 8, 8, 3}, g), true);
  NoiseParams p;
  p.alpha = 1.0;
  p.gaussian_sigma_255 = 0;
  p.poisson_gain = 0;
  Rng rng(0);
  const auto out = simulate_lowlight(lf, p, rng);
  EXPECT_TRUE(out.lf.data() == lf.data());
  EXPECT_EQ(out.alpha_used, 1.0);
}

TEST(Simulate, NoiselessScaling) {
  const auto lf = constant_lf({2, 2, 4, 4, 1}, 0.5);
  NoiseParams p;
  p.alpha = 0.3;
  p.gaussian_sigma_255 = 0;
  Rng rng(0);
  const auto out = simulate_lowlight(lf, p, rng);
  for (double v : out.lf.data().values()) EXPECT_DOUBLE_EQ(v, 0.15);
}

TEST(Simulate, SynFMomentsBeforeClipping) {
  const auto lf = constant_lf({10, 10, 60, 60, 3}, 0.5);
  Rng rng(7);
  const auto [raw, alpha] = simulate_lowlight_unclipped(lf, NoiseParams::syn_f(), rng);
  ASSERT_GE(raw.size(), 1000000u);
  EXPECT_EQ(alpha, 0.2);
  const Moments m = moments(raw);
  EXPECT_NEAR(m.mean, 0.1, 0.01 * 0.1);
  EXPECT_NEAR(m.sd, 20.0 / 255.0, 0.02 * 20.0 / 255.0);
}

TEST(Simulate, SignalDependentVariance) {
  const auto lf = constant_lf({10, 10, 60, 60, 3}, 0.5);
  NoiseParams p;
  p.alpha = 0.2;
  p.gaussian_sigma_255 = 0;
  p.poisson_gain = 0.01;
  Rng rng(8);
  const Moments m = moments(simulate_lowlight_unclipped(lf, p, rng).first);
  const double expected_var = 0.01 * 0.1;
  EXPECT_NEAR(m.sd * m.sd, expected_var, 0.02 * expected_var);
  EXPECT_NEAR(m.mean, 0.1, 1e-3);
}

TEST(Simulate, VarianceGrowsWithSignal) {
  NoiseParams p;
  p.alpha = 1.0;
  p.gaussian_sigma_255 = 0;
  p.poisson_gain = 0.02;
  Rng r1(9), r2(9);
  const auto dark = moments(simulate_lowlight_unclipped(constant_lf({4, 4, 50, 50, 3}, 0.1), p, r1).first);
  const auto bright = moments(simulate_lowlight_unclipped(constant_lf({4, 4, 50, 50, 3}, 0.4), p, r2).first);
  EXPECT_NEAR(dark.sd * dark.sd, 0.002, 1e-4);
  EXPECT_NEAR(bright.sd * bright.sd, 0.008, 4e-4);
}

TEST(Simulate, ClippedOutputIsClipOfUnclipped) {
  const auto lf = constant_lf({3, 3, 20, 20, 3}, 0.5);
  Rng a(11), b(11);
  const auto clipped = simulate_lowlight(lf, NoiseParams::syn_f(), a);
  const auto raw = simulate_lowlight_unclipped(lf, NoiseParams::syn_f(), b).first;
  bool saw_clip = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_EQ(clipped.lf.data()[i], std::clamp(raw[i], 0.0, 1.0));
    saw_clip = saw_clip || raw[i] < 0.0;
  }
  EXPECT_TRUE(saw_clip);
  for (double v : clipped.lf.data().values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Simulate, DeterministicUnderSeed) {
  const auto lf = constant_lf({3, 3, 8, 8, 3}, 0.4);
  Rng a(99), b(99), c(100);
  const auto x = simulate_lowlight(lf, NoiseParams::syn_d(), a);
  const auto y = simulate_lowlight(lf, NoiseParams::syn_d(), b);
  const auto z = simulate_lowlight(lf, NoiseParams::syn_d(), c);
  EXPECT_TRUE(x.lf.data() == y.lf.data());
  EXPECT_EQ(x.alpha_used, y.alpha_used);
  EXPECT_FALSE(x.lf.data() == z.lf.data());
}

TEST(Simulate, RejectsOutOfRangeInput) {
  Tensor<double> t(Shape{1, 1, 2, 2, 1}, 0.5);
  t[0] = 1.2;
  Rng rng(0);
  EXPECT_THROW(simulate_lowlight(LightField4D<double>(t), NoiseParams::syn_f(), rng), RangeError);
}

TEST(SyntheticScene, ZeroDisparityRepeatsBase) {
  std::mt19937_64 g(1);
  const auto base = oracle::random_tensor({6, 7, 3}, g);
  const auto lf = make_synthetic_scene(base, 0.0, 3, 3);
  ASSERT_EQ(lf.data().shape(), (Shape{3, 3, 6, 7, 3}));
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v) EXPECT_TRUE(extract_sai(lf, u, v) == base);
}

TEST(SyntheticScene, IntegerShiftMatchesDirectTranslation) {
  std::mt19937_64 g(2);
  const auto base = oracle::random_tensor({12, 14, 1}, g);
  const double disp = 2.0;
  const auto lf = make_synthetic_scene(base, disp, 3, 3);
  // margin = 2, centre view (1,1).
  const Dims5 d = lf.dims();
  ASSERT_EQ(d.s, 8u);
  ASSERT_EQ(d.t, 10u);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t s = 0; s < d.s; ++s)
        for (std::size_t t = 0; t < d.t; ++t) {
          const long r = static_cast<long>(s) + 2 - 2 * (static_cast<long>(v) - 1);
          const long c = static_cast<long>(t) + 2 - 2 * (static_cast<long>(u) - 1);
          EXPECT_EQ(lf(u, v, s, t, 0), base[static_cast<std::size_t>(r * 14 + c)]);
        }
}

TEST(SyntheticScene, TooLargeDisparity) {
  const Tensor<double> base(Shape{4, 4, 1}, 0.5);
  EXPECT_THROW(make_synthetic_scene(base, 3.0, 3, 3), RangeError);
}

TEST(BaseImage, RangeAndDeterminism) {
  Rng a(5), b(5);
  const auto x = make_base_image<double>(32, 40, 3, a);
  const auto y = make_base_image<double>(32, 40, 3, b);
  EXPECT_TRUE(x == y);
  for (double v : x.values()) {
    EXPECT_GE(v, 0.05);
    EXPECT_LE(v, 0.95);
  }
}

}  // namespace
}  // namespace lfdcu
