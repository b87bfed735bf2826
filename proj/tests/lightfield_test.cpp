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

#include "lfdcu/lightfield.hpp"

#include <gtest/gtest.h>

#include <random>

#include "lfdcu/lowlight_sim.hpp"
#include "oracles.hpp"

namespace lfdcu {
namespace {

Tensor<double> index_sum_field(const Dims5& d) {
  Tensor<double> t(d);
  const double mx = static_cast<double>(d.u + d.v - 2);
  for (std::size_t u = 0; u < d.u; ++u)
    for (std::size_t v = 0; v < d.v; ++v)
      for (std::size_t s = 0; s < d.s; ++s)
        for (std::size_t tt = 0; tt < d.t; ++tt)
          for (std::size_t c = 0; c < d.c; ++c) t.at(u, v, s, tt, c) = (u + v) / mx;
  return t;
}

TEST(MakeLightfield, AcceptsZeros) {
  auto lf = make_lightfield(Tensor<double>(Shape{3, 3, 8, 8, 3}), true);
  EXPECT_EQ(lf.dims().views(), 9u);
  EXPECT_EQ(lf.dims().c, 3u);
}

TEST(MakeLightfield, RejectsTwoChannels) {
  EXPECT_THROW(make_lightfield(Tensor<double>(Shape{3, 3, 8, 8, 2}), false), DimensionError);
}

TEST(MakeLightfield, RejectsWrongRank) {
  EXPECT_THROW(make_lightfield(Tensor<double>(Shape{3, 8, 8, 3}), false), DimensionError);
  EXPECT_THROW(make_lightfield(Tensor<double>(Shape{0, 3, 8, 8, 3}), false), DimensionError);
}

TEST(MakeLightfield, RangeCheckOnlyWhenAsked) {
  Tensor<double> t(Shape{1, 1, 2, 2, 1}, 0.5);
  t[2] = 1.5;
  EXPECT_THROW(make_lightfield(t, true), RangeError);
  EXPECT_NO_THROW(make_lightfield(t, false));
}

TEST(MakeLightfield, RejectsNonFinite) {
  Tensor<double> t(Shape{1, 1, 2, 2, 1}, 0.5);
  t[1] = std::nan("");
  EXPECT_THROW(make_lightfield(t, false), NonFiniteError);
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(make_lightfield(t, false), NonFiniteError);
}

TEST(ExtractSai, IndexSumField) {
  const Dims5 d{3, 4, 5, 6, 3};
  const auto lf = make_lightfield(index_sum_field(d), true);
  const auto sai = extract_sai(lf, 1, 2);
  ASSERT_EQ(sai.shape(), (Shape{5, 6, 3}));
  for (double v : sai.values()) EXPECT_DOUBLE_EQ(v, 3.0 / 5.0);
}

TEST(ExtractSai, MatchesDirectIndexing) {
  std::mt19937_64 rng(3);
  const Dims5 d{3, 2, 4, 5, 3};
  const auto lf = make_lightfield(oracle::random_tensor(d.shape(), rng), true);
  for (std::size_t u = 0; u < d.u; ++u)
    for (std::size_t v = 0; v < d.v; ++v) {
      const auto sai = extract_sai(lf, u, v);
      for (std::size_t s = 0; s < d.s; ++s)
        for (std::size_t t = 0; t < d.t; ++t)
          for (std::size_t c = 0; c < d.c; ++c)
            EXPECT_EQ(sai[(s * d.t + t) * d.c + c], lf.data()[oracle::idx5(d, u, v, s, t, c)]);
    }
}

TEST(ExtractSai, IsACopy) {
  auto lf = make_lightfield(Tensor<double>(Shape{2, 2, 3, 3, 1}, 0.5), true);
  auto sai = extract_sai(lf, 0, 0);
  sai[0] = 0.9;
  EXPECT_EQ(lf(0, 0, 0, 0, 0), 0.5);
  const auto other = extract_sai(lf, 1, 1);
  for (double v : other.values()) EXPECT_EQ(v, 0.5);
}

TEST(ExtractSai, OutOfRange) {
  auto lf = make_lightfield(Tensor<double>(Shape{3, 3, 4, 4, 3}), true);
  EXPECT_THROW(extract_sai(lf, 3, 0), IndexError);
  EXPECT_THROW(extract_sai(lf, 0, 3), IndexError);
}

TEST(ExtractEpi, ShapesAndConstant) {
  auto lf = make_lightfield(Tensor<double>(Shape{3, 3, 8, 8, 3}, 0.25), true);
  const auto h = extract_epi(lf, EpiOrientation::kHorizontal, 1, 2, 0);
  EXPECT_EQ(h.rows, 3u);
  EXPECT_EQ(h.cols, 8u);
  for (double v : h.data) EXPECT_EQ(v, 0.25);
  const auto v = extract_epi(lf, EpiOrientation::kVertical, 0, 7, 2);
  EXPECT_EQ(v.rows, 3u);
  EXPECT_EQ(v.cols, 8u);
}

TEST(ExtractEpi, AxisSemantics) {
  std::mt19937_64 rng(5);
  const Dims5 d{3, 4, 5, 6, 3};
  const auto lf = make_lightfield(oracle::random_tensor(d.shape(), rng), true);
  const auto h = extract_epi(lf, EpiOrientation::kHorizontal, 2, 3, 1);
  ASSERT_EQ(h.rows, d.u);
  ASSERT_EQ(h.cols, d.t);
  for (std::size_t u = 0; u < d.u; ++u)
    for (std::size_t t = 0; t < d.t; ++t) EXPECT_EQ(h(u, t), lf(u, 2, 3, t, 1));
  const auto v = extract_epi(lf, EpiOrientation::kVertical, 1, 4, 2);
  ASSERT_EQ(v.rows, d.v);
  ASSERT_EQ(v.cols, d.s);
  for (std::size_t vv = 0; vv < d.v; ++vv)
    for (std::size_t s = 0; s < d.s; ++s) EXPECT_EQ(v(vv, s), lf(1, vv, s, 4, 2));
}

TEST(ExtractEpi, OutOfRange) {
  auto lf = make_lightfield(Tensor<double>(Shape{3, 2, 4, 5, 1}), true);
  EXPECT_THROW(extract_epi(lf, EpiOrientation::kHorizontal, 2, 0, 0), IndexError);
  EXPECT_THROW(extract_epi(lf, EpiOrientation::kHorizontal, 0, 4, 0), IndexError);
  EXPECT_THROW(extract_epi(lf, EpiOrientation::kVertical, 3, 0, 0), IndexError);
  EXPECT_THROW(extract_epi(lf, EpiOrientation::kVertical, 0, 5, 0), IndexError);
  EXPECT_THROW(extract_epi(lf, EpiOrientation::kVertical, 0, 0, 1), IndexError);
}

// Shift (in columns) that maximises normalised correlation of row r with row 0.
int best_shift(const EpiSlice<double>& e, std::size_t r, int search) {
  int best = 0;
  double best_score = -2;
  for (int k = -search; k <= search; ++k) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    int n = 0;
    for (std::size_t c = 0; c < e.cols; ++c) {
      const long src = static_cast<long>(c) + k;
      if (src < 0 || src >= static_cast<long>(e.cols)) continue;
      const double a = e(r, static_cast<std::size_t>(src)), b = e(0, c);
      sa += a; sb += b; saa += a * a; sbb += b * b; sab += a * b;
      ++n;
    }
    const double cov = sab - sa * sb / n;
    const double score = cov / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

class EpiDisparity : public ::testing::TestWithParam<int> {};

TEST_P(EpiDisparity, LinesShiftByDisparity) {
  const int disparity = GetParam();
  std::mt19937_64 rng(11);
  const auto base = oracle::random_tensor({40, 40, 1}, rng);
  const auto lf = make_synthetic_scene(base, disparity, 5, 5);
  const Dims5 d = lf.dims();
  for (std::size_t fixed = 0; fixed < d.v; ++fixed) {
    const auto h = extract_epi(lf, EpiOrientation::kHorizontal, fixed, d.s / 2, 0);
    for (std::size_t u = 1; u < d.u; ++u)
      EXPECT_EQ(best_shift(h, u, 6), disparity * static_cast<int>(u));
    const auto v = extract_epi(lf, EpiOrientation::kVertical, fixed, d.t / 2, 0);
    for (std::size_t vv = 1; vv < d.v; ++vv)
      EXPECT_EQ(best_shift(v, vv, 6), disparity * static_cast<int>(vv));
  }
}

INSTANTIATE_TEST_SUITE_P(Disparities, EpiDisparity, ::testing::Values(-1, 0, 1));

TEST(PlaneBatch, SpatialShape) {
  std::mt19937_64 rng(1);
  const auto f = FeatureField<double>(oracle::random_tensor({2, 2, 4, 4, 8}, rng));
  const auto b = views_as_plane_batch(f, Plane::kSpatial);
  EXPECT_EQ(b.slices.shape(), (Shape{4, 4, 4, 8}));
}

TEST(PlaneBatch, EpiHMatchesBruteForceEnumeration) {
  std::mt19937_64 rng(2);
  const Dims5 d{2, 3, 4, 5, 8};
  const auto x = oracle::random_tensor(d.shape(), rng);
  const auto b = views_as_plane_batch(FeatureField<double>(x), Plane::kEpiH);
  ASSERT_EQ(b.slices.shape(), (Shape{d.v * d.s, d.u, d.t, d.c}));
  // Every (v, s) pair is one slice; collect the slices the brute-force way
  // and check each appears in the batch exactly once.
  std::vector<int> used(b.count(), 0);
  for (std::size_t v = 0; v < d.v; ++v)
    for (std::size_t s = 0; s < d.s; ++s) {
      int matches = 0;
      for (std::size_t k = 0; k < b.count(); ++k) {
        bool same = true;
        for (std::size_t u = 0; u < d.u && same; ++u)
          for (std::size_t t = 0; t < d.t && same; ++t)
            for (std::size_t c = 0; c < d.c && same; ++c)
              same = b.slices[((k * d.u + u) * d.t + t) * d.c + c] ==
                     x[oracle::idx5(d, u, v, s, t, c)];
        if (same) {
          ++matches;
          ++used[k];
        }
      }
      EXPECT_EQ(matches, 1);
    }
  for (int u : used) EXPECT_EQ(u, 1);
}

TEST(PlaneBatch, SlicesHoldThePlaneAxes) {
  std::mt19937_64 rng(9);
  const Dims5 d{2, 3, 4, 5, 2};
  const auto x = oracle::random_tensor(d.shape(), rng);
  const FeatureField<double> f(x);
  const auto ang = views_as_plane_batch(f, Plane::kAngular);
  EXPECT_EQ(ang.slices.shape(), (Shape{d.s * d.t, d.u, d.v, d.c}));
  const auto ev = views_as_plane_batch(f, Plane::kEpiV);
  EXPECT_EQ(ev.slices.shape(), (Shape{d.u * d.t, d.v, d.s, d.c}));
  // First angular slice is the (s=0, t=0) pixel of every view.
  for (std::size_t u = 0; u < d.u; ++u)
    for (std::size_t v = 0; v < d.v; ++v)
      EXPECT_EQ(ang.slices[(u * d.v + v) * d.c], x[oracle::idx5(d, u, v, 0, 0, 0)]);
}

TEST(PlaneBatch, RoundTripIsIdentity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 5);
    const Dims5 d{dim(rng), dim(rng), dim(rng), dim(rng), dim(rng)};
    const auto x = oracle::random_tensor(d.shape(), rng, -3, 3);
    for (Plane p : {Plane::kSpatial, Plane::kAngular, Plane::kEpiH, Plane::kEpiV}) {
      const auto b = views_as_plane_batch(FeatureField<double>(x), p);
      EXPECT_EQ(b.slices.size(), x.size());
      EXPECT_TRUE(restore_plane_batch(b) == x) << plane_name(p);
    }
  }
}

TEST(Matricize, ConstantAndShape) {
  auto lf = make_lightfield(Tensor<double>(Shape{3, 3, 8, 8, 3}, 0.5), true);
  const auto m = matricize_center_sai(lf);
  EXPECT_EQ(m.shape(), (Shape{8, 8}));
  for (double v : m.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Matricize, ChannelMean) {
  Tensor<double> t(Shape{3, 3, 1, 1, 3}, 0.0);
  t.at(1, 1, 0, 0, 0) = 0.9;
  t.at(1, 1, 0, 0, 1) = 0.3;
  t.at(1, 1, 0, 0, 2) = 0.3;
  const auto m = matricize_center_sai(make_lightfield(t, true));
  EXPECT_NEAR(m[0], 0.5, 1e-15);
}

TEST(Matricize, EvenGridUsesFloorCentre) {
  Tensor<double> t(Shape{4, 2, 1, 1, 1}, 0.0);
  t.at(2, 1, 0, 0, 0) = 0.7;
  EXPECT_EQ(matricize_center_sai(make_lightfield(t, true))[0], 0.7);
}

}  // namespace
}  // namespace lfdcu
