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

#include "lfdcu/unfold.hpp"

#include <gtest/gtest.h>

#include <random>

#include "lfdcu/train.hpp"
#include "oracles.hpp"

namespace lfdcu {
namespace {

using V = Var<double>;

ModelConfig tiny_config() {
  ModelConfig c;
  c.stages = 2;
  c.layers = 1;
  c.channels = 2;
  c.views_u = 2;
  c.views_v = 2;
  return c;
}

LightField4D<double> random_lf(const Shape& s, std::uint64_t seed, double lo = 0.02,
                               double hi = 0.98) {
  std::mt19937_64 g(seed);
  return make_lightfield(oracle::random_tensor(s, g, lo, hi), true);
}

void zero_modules(Model<double>& m) {
  for (auto& st : m.stages) {
    st.psi.zero();
    st.phi.zero();
    st.omega.zero();
  }
}

TEST(InitState, CopiesObservation) {
  const auto d = random_lf({2, 2, 3, 3, 3}, 1);
  const auto s = init_state(d);
  EXPECT_TRUE(s.lf_n.data() == d.data());
  EXPECT_TRUE(s.nu.data() == d.data());
  EXPECT_EQ(s.k, 0u);
}

TEST(CoarseIllumination, Formula) {
  const auto x = random_lf({2, 2, 3, 4, 3}, 2);
  const auto d = random_lf({2, 2, 3, 4, 3}, 3);
  for (double gamma : {0.0, 0.3, 1.0}) {
    const auto i = coarse_illumination(x, d, gamma);
    ASSERT_EQ(i.data.shape(), (Shape{2, 2, 3, 4, 1}));
    for (std::size_t p = 0; p < i.data.size(); ++p) {
      double want = -1e9;
      for (std::size_t c = 0; c < 3; ++c) {
        const double xv = x.data()[p * 3 + c], dv = d.data()[p * 3 + c];
        want = std::max(want, xv - gamma * (xv - dv));
      }
      EXPECT_NEAR(i.data[p], want, 1e-15);
    }
  }
}

TEST(CoarseIllumination, ShapeMismatch) {
  EXPECT_THROW(coarse_illumination(random_lf({2, 2, 3, 3, 3}, 1), random_lf({2, 2, 3, 4, 3}, 1), 0.5),
               ShapeError);
}

TEST(RefineIllumination, ZeroModuleClamps) {
  Rng rng(4);
  auto psi = DeepModuleParams<double>::make(1, 1, FeatureBlock::kDpef, 1, 2, 4, rng);
  psi.zero();
  Tensor<double> t(Shape{2, 2, 2, 2, 1});
  const double vals[] = {-0.5, 0.0, 0.001, 0.01, 0.2, 0.99, 1.0, 1.7};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = vals[i % 8];
  const auto out = refine_illumination(IlluminationMap<double>{t}, psi, 1e-2);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_EQ(out.data[i], std::clamp(t[i], 1e-2, 1.0));
}

TEST(RefineIllumination, SubtractsModuleOutput) {
  Rng rng(5);
  const auto psi = DeepModuleParams<double>::make(1, 1, FeatureBlock::kDpef, 1, 2, 4, rng);
  std::mt19937_64 g(6);
  const auto t = oracle::random_tensor({2, 2, 3, 3, 1}, g, 0.3, 0.7);
  const auto psi_out = graph::deep_module(V::constant(t), psi).value();
  const auto out = refine_illumination(IlluminationMap<double>{t}, psi, 1e-2);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_NEAR(out.data[i], std::clamp(t[i] - psi_out[i], 1e-2, 1.0), 1e-15);
}

TEST(Compensation, ZeroModuleGivesZero) {
  Rng rng(7);
  auto phi = DeepModuleParams<double>::make(6, 3, FeatureBlock::kDpef, 1, 2, 4, rng);
  phi.zero();
  const auto delta = compensation(random_lf({2, 2, 3, 3, 3}, 8), random_lf({2, 2, 3, 3, 3}, 9), phi);
  for (double v : delta.data.values()) EXPECT_EQ(v, 0.0);
}

TEST(Compensation, BrightnessMatchedInputHasObservationMean) {
  const auto x = random_lf({2, 2, 3, 3, 3}, 10);
  const auto d = random_lf({2, 2, 3, 3, 3}, 11, 0.0, 0.2);
  const auto m = brightness_matched(x, d);
  EXPECT_NEAR(mean_of(m), mean_of(d.data()), 1e-15);
  const double ratio = mean_of(d.data()) / mean_of(x.data());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], ratio * x.data()[i], 1e-15);
}

TEST(Compensation, ModuleSeesObservationAndMatchedEstimate) {
  Rng rng(12);
  const auto phi = DeepModuleParams<double>::make(6, 3, FeatureBlock::kDpef, 1, 2, 4, rng);
  const auto x = random_lf({2, 2, 3, 3, 3}, 13);
  const auto d = random_lf({2, 2, 3, 3, 3}, 14);
  const auto m = brightness_matched(x, d);
  Tensor<double> cat(Shape{2, 2, 3, 3, 6});
  for (std::size_t p = 0; p < 36; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      cat[p * 6 + c] = d.data()[p * 3 + c];
      cat[p * 6 + 3 + c] = m[p * 3 + c];
    }
  const auto want = graph::deep_module(V::constant(cat), phi).value();
  EXPECT_LE(max_abs_diff(compensation(x, d, phi).data, want), 1e-14);
}

TEST(Compensation, DegenerateMean) {
  Rng rng(15);
  const auto phi = DeepModuleParams<double>::make(6, 3, FeatureBlock::kDpef, 1, 2, 4, rng);
  const auto zero = make_lightfield(Tensor<double>(Shape{2, 2, 3, 3, 3}), true);
  EXPECT_THROW(compensation(zero, random_lf({2, 2, 3, 3, 3}, 1), phi), DegenerateMeanError);
  EXPECT_THROW(brightness_matched(zero, random_lf({2, 2, 3, 3, 3}, 1)), DegenerateMeanError);
}

TEST(DataGradient, Formula) {
  const auto x = random_lf({2, 2, 3, 3, 3}, 16);
  const auto d = random_lf({2, 2, 3, 3, 3}, 17);
  std::mt19937_64 g(18);
  const IlluminationMap<double> illum{oracle::random_tensor({2, 2, 3, 3, 1}, g, 0.01, 1)};
  const CompensationField<double> delta{oracle::random_tensor({2, 2, 3, 3, 3}, g, -0.1, 0.1)};
  const auto grad = data_gradient(illum, x, d, delta);
  for (std::size_t p = 0; p < 36; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      const double I = illum.data[p];
      EXPECT_NEAR(grad[i], I * (I * x.data()[i] - d.data()[i] + delta.data[i]), 1e-15);
    }
}

TEST(OptimizationUpdate, Formula) {
  const auto x = random_lf({2, 2, 3, 3, 3}, 19);
  const auto nu = random_lf({2, 2, 3, 3, 3}, 20);
  std::mt19937_64 g(21);
  const auto grad = oracle::random_tensor({2, 2, 3, 3, 3}, g, -1, 1);
  const auto out = optimization_update(x, grad, nu, 0.37);
  for (std::size_t i = 0; i < grad.size(); ++i)
    EXPECT_NEAR(out.data()[i], x.data()[i] - (grad[i] + 0.37 * (x.data()[i] - nu.data()[i])),
                1e-15);
}

TEST(OptimizationUpdate, FixedPointAtObservation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = random_lf({2, 3, 4, 5, 3}, seed, 0.0, 1.0);
    const auto s = init_state(d);
    const IlluminationMap<double> ones{Tensor<double>(Shape{2, 3, 4, 5, 1}, 1.0)};
    const CompensationField<double> zeros{Tensor<double>(d.data().shape())};
    const auto g = data_gradient(ones, s.lf_n, d, zeros);
    EXPECT_EQ(max_abs_diff(optimization_update(s.lf_n, g, s.nu, 0.0).data(), d.data()), 0.0);
  }
}

TEST(ProximalRegularize, ZeroModuleIsIdentity) {
  Rng rng(22);
  auto omega = DeepModuleParams<double>::make(3, 3, FeatureBlock::kDpef, 1, 2, 4, rng);
  omega.zero();
  const auto x = random_lf({2, 2, 3, 3, 3}, 23);
  EXPECT_TRUE(proximal_regularize(x.data(), omega) == x.data());
}

// run_stage with zeroed modules, composed by hand per pixel.
TEST(RunStage, HandFormulaWithZeroModules) {
  ModelConfig cfg = tiny_config();
  cfg.views_u = cfg.views_v = 1;
  auto model = Model<double>::make(cfg, 1);
  zero_modules(model);
  std::mt19937_64 g(24);
  std::uniform_real_distribution<double> uni(0, 1), gam(-0.5, 1.5), mu(0.01, 2);
  for (int trial = 0; trial < 200; ++trial) {
    auto& p = model.stages[0];
    p.gamma.mutable_value()[0] = gam(g);
    p.set_mu(mu(g));
    const auto d = random_lf({1, 1, 2, 2, 3}, 1000 + trial);
    StageState<double> s{random_lf({1, 1, 2, 2, 3}, 2000 + trial),
                         random_lf({1, 1, 2, 2, 3}, 3000 + trial), 0, {}};
    const auto next = run_stage(s, d, p, cfg);
    const double gamma = p.gamma.value()[0], m = p.mu();
    for (std::size_t px = 0; px < 4; ++px) {
      double ti = -1e9;
      for (std::size_t c = 0; c < 3; ++c) {
        const double x = s.lf_n.data()[px * 3 + c], dv = d.data()[px * 3 + c];
        ti = std::max(ti, x - gamma * (x - dv));
      }
      const double I = std::clamp(ti, 1e-2, 1.0);
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = px * 3 + c;
        const double x = s.lf_n.data()[i];
        const double want = x - (I * (I * x - d.data()[i]) + m * (x - s.nu.data()[i]));
        EXPECT_NEAR(next.lf_n.data()[i], want, 1e-14);
        EXPECT_EQ(next.nu.data()[i], next.lf_n.data()[i]);
      }
    }
    EXPECT_EQ(next.k, 1u);
  }
}

TEST(RunStage, RejectsStagePastEnd) {
  ModelConfig cfg = tiny_config();
  const auto model = Model<double>::make(cfg, 1);
  const auto d = random_lf({2, 2, 3, 3, 3}, 1);
  StageState<double> s = init_state(d);
  s.k = cfg.stages;
  EXPECT_THROW(run_stage(s, d, model.stages[0], cfg), ConfigError);
}

TEST(Enhance, OutputsAndStages) {
  const auto model = Model<double>::make(tiny_config(), 3);
  const auto d = random_lf({2, 2, 6, 6, 3}, 25, 0.0, 0.3);
  const auto r = enhance(d, model);
  EXPECT_EQ(r.output.data().shape(), d.data().shape());
  ASSERT_EQ(r.stage_outputs.size(), 2u);
  for (double v : r.output.data().values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_TRUE(r.stage_outputs.back().data() == r.output.data());
  EXPECT_EQ(r.final_delta.shape(), d.data().shape());
}

TEST(Enhance, MatchesChainedRunStage) {
  const auto model = Model<double>::make(tiny_config(), 4);
  const auto d = random_lf({2, 2, 5, 5, 3}, 26, 0.0, 0.3);
  StageState<double> s = init_state(d);
  for (std::size_t k = 0; k < 2; ++k) s = run_stage(s, d, model.stage(k), model.config);
  Tensor<double> want = s.lf_n.data();
  for (auto& v : want.values()) v = std::clamp(v, 0.0, 1.0);
  EXPECT_LE(max_abs_diff(enhance(d, model).output.data(), want), 1e-15);
}

TEST(Enhance, Deterministic) {
  const auto model = Model<double>::make(tiny_config(), 5);
  const auto d = random_lf({2, 2, 5, 5, 3}, 27, 0.0, 0.3);
  EXPECT_TRUE(enhance(d, model).output.data() == enhance(d, model).output.data());
}

TEST(Enhance, RejectsMismatchedViews) {
  const auto model = Model<double>::make(tiny_config(), 5);
  EXPECT_THROW(enhance(random_lf({3, 3, 5, 5, 3}, 1), model), ShapeError);
  EXPECT_THROW(enhance(random_lf({2, 2, 5, 5, 1}, 1), model), ShapeError);
}

TEST(Model, SharedWeightsStoreOneStage) {
  ModelConfig cfg = tiny_config();
  cfg.stages = 3;
  const auto separate = Model<double>::make(cfg, 1);
  cfg.share_stage_weights = true;
  auto shared = Model<double>::make(cfg, 1);
  EXPECT_EQ(shared.stages.size(), 1u);
  EXPECT_EQ(separate.stages.size(), 3u);
  EXPECT_EQ(&shared.stage(0), &shared.stage(2));
  EXPECT_EQ(shared.param_count() * 3, const_cast<Model<double>&>(separate).param_count());
}

TEST(Model, ParamCountMatchesConfig) {
  for (FeatureBlock kind : {FeatureBlock::kDpef, FeatureBlock::kSas, FeatureBlock::kSimplified})
    for (bool cdc : {true, false}) {
      ModelConfig cfg = tiny_config();
      cfg.feature_block = kind;
      cfg.use_cdc = cdc;
      auto m = Model<double>::make(cfg, 1);
      EXPECT_EQ(m.param_count(), cfg.stages * cfg.stage_param_count(kind, cfg.block_channels()));
    }
}

TEST(Model, NoCompensationHasNoPhi) {
  ModelConfig cfg = tiny_config();
  cfg.use_cdc = false;
  auto m = Model<double>::make(cfg, 1);
  for (const auto& [name, v] : m.named_parameters())
    EXPECT_EQ(name.find(".phi"), std::string::npos) << name;
  const auto r = enhance(random_lf({2, 2, 4, 4, 3}, 2), m);
  for (double v : r.final_delta.values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, MatchedWidthKeepsParameterBudget) {
  ModelConfig cfg;
  cfg.stages = 2;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.views_u = cfg.views_v = 3;
  const double target = static_cast<double>(cfg.stage_param_count(FeatureBlock::kDpef, 8));
  for (FeatureBlock kind : {FeatureBlock::kSas, FeatureBlock::kSimplified}) {
    cfg.feature_block = kind;
    const std::size_t c = cfg.block_channels();
    const double got = static_cast<double>(cfg.stage_param_count(kind, c));
    const double below = static_cast<double>(cfg.stage_param_count(kind, c - 1));
    const double above = static_cast<double>(cfg.stage_param_count(kind, c + 1));
    EXPECT_LE(std::abs(got - target), std::abs(below - target));
    EXPECT_LE(std::abs(got - target), std::abs(above - target));
    EXPECT_LT(std::abs(got - target) / target, 0.1) << feature_block_name(kind);
  }
  cfg.match_param_count = false;
  EXPECT_EQ(cfg.block_channels(), 8u);
}

TEST(Model, InitialScalars) {
  const auto m = Model<double>::make(tiny_config(), 1);
  EXPECT_EQ(m.stages[0].gamma.value().item(), 0.5);
  EXPECT_NEAR(m.stages[0].mu(), 0.5, 1e-15);
}

TEST(Model, CloneIsDeep) {
  auto m = Model<double>::make(tiny_config(), 1);
  auto c = m.clone();
  c.stages[0].gamma.mutable_value()[0] = 0.9;
  EXPECT_EQ(m.stages[0].gamma.value().item(), 0.5);
  auto a = m.named_parameters();
  auto b = m.clone().named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].second.value() == b[i].second.value());
}

TEST(Model, ConfigValidation) {
  ModelConfig c = tiny_config();
  c.stages = 0;
  EXPECT_THROW(Model<double>::make(c, 1), ConfigError);
  c = tiny_config();
  c.clamp_floor = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.image_channels = 2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DualIllumination, CarriesIlluminationBetweenStages) {
  ModelConfig cfg = tiny_config();
  cfg.illumination = IlluminationMode::kDualVariable;
  auto model = Model<double>::make(cfg, 6);
  for (const auto& [name, v] : model.named_parameters())
    EXPECT_EQ(name.find("gamma"), std::string::npos);
  zero_modules(model);
  const auto d = random_lf({2, 2, 3, 3, 3}, 28, 0.0, 0.3);
  // With zero modules I stays clamp(max_c d) in every stage.
  StageState<double> s = init_state(d);
  s = run_stage(s, d, model.stage(0), cfg);
  ASSERT_EQ(s.illumination.size(), 36u);
  for (std::size_t p = 0; p < 36; ++p) {
    const double m = std::max({d.data()[p * 3], d.data()[p * 3 + 1], d.data()[p * 3 + 2]});
    EXPECT_EQ(s.illumination[p], std::clamp(m, 1e-2, 1.0));
  }
  const auto s2 = run_stage(s, d, model.stage(1), cfg);
  EXPECT_TRUE(s2.illumination == s.illumination);
}

TEST(Gradients, StageModules) {
  ModelConfig cfg = tiny_config();
  cfg.stages = 1;
  auto model = Model<double>::make(cfg, 7);
  std::mt19937_64 g(29);
  const auto d = V::constant(oracle::random_tensor({2, 2, 3, 3, 3}, g, 0.05, 0.3));
  const auto x = V::constant(oracle::random_tensor({2, 2, 3, 3, 3}, g, 0.1, 0.9));
  auto& st = model.stages[0];
  {
    auto ti = V::parameter(oracle::random_tensor({2, 2, 3, 3, 1}, g, 0.2, 0.8));
    std::vector<std::pair<std::string, V>> params{{"tilde", ti}};
    st.psi.visit("psi", [&](const std::string& n, V& v) { params.emplace_back(n, v); });
    const auto rep = grad_check<double>(
        [&] { return ops::mean_all(graph::refine_illumination(ti, st.psi, 1e-2)); }, params);
    EXPECT_LE(rep.max_rel_error, 1e-5) << rep.worst_param;
  }
  {
    auto xp = V::parameter(x.value());
    std::vector<std::pair<std::string, V>> params{{"x", xp}};
    st.phi.visit("phi", [&](const std::string& n, V& v) { params.emplace_back(n, v); });
    const auto rep = grad_check<double>(
        [&] { return ops::mean_all(graph::compensation(xp, d, st.phi)); }, params);
    EXPECT_LE(rep.max_rel_error, 1e-5) << rep.worst_param;
  }
}

}  // namespace
}  // namespace lfdcu
