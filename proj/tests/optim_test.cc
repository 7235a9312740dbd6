// Copyright 2026 The CGC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cgc/optim.h"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "cgc/error.h"
#include "test_util.h"

namespace cgc::optim {
namespace {

TEST(AdamTest, ZeroGradientLeavesParamsUnchanged) {
  auto state = OptimizerState::make(OptimizerHyperparams::adam(1e-3), 4);
  ParamVector p(4);
  p << 1, -2, 3, 0.5;
  const ParamVector before = p;
  for (int k = 0; k < 5; ++k) adam_step(state, p, ParamVector::Zero(4));
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step_count, 5u);
}

TEST(AdamTest, FirstStepIsBiasCorrected) {
  const auto hp = OptimizerHyperparams::adam(0.01);
  auto state = OptimizerState::make(hp, 3);
  ParamVector p = ParamVector::Zero(3);
  ParamVector g(3);
  g << 2.0, -1e-3, 0.0;
  adam_step(state, p, g);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], -hp.learning_rate * g[i] / (std::abs(g[i]) + hp.epsilon),
                1e-15);
  }
}

TEST(AdamTest, ConstantGradientStepApproachesLearningRate) {
  const auto hp = OptimizerHyperparams::adam(1e-3);
  auto state = OptimizerState::make(hp, 2);
  ParamVector p = ParamVector::Zero(2);
  ParamVector g(2);
  g << 0.3, -7.0;
  ParamVector prev = p;
  for (int k = 0; k < 2000; ++k) {
    prev = p;
    adam_step(state, p, g);
  }
  const ParamVector step = p - prev;
  EXPECT_NEAR(step[0], -hp.learning_rate, 1e-9);
  EXPECT_NEAR(step[1], hp.learning_rate, 1e-9);
}

TEST(AdamTest, NonFiniteGradientNamesIndex) {
  auto state = OptimizerState::make(OptimizerHyperparams::adam(1e-3), 3);
  ParamVector p = ParamVector::Zero(3);
  ParamVector g = ParamVector::Zero(3);
  g[2] = std::numeric_limits<double>::infinity();
  try {
    adam_step(state, p, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(LionTest, SignUpdateFromZeroMomentum) {
  auto state = OptimizerState::make(OptimizerHyperparams::lion(1e-4), 3);
  ParamVector p = ParamVector::Ones(3);
  ParamVector g(3);
  g << 5.0, -0.2, 0.0;
  lion_step(state, p, g);
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 1e-4);
  EXPECT_DOUBLE_EQ(p[1], 1.0 + 1e-4);
  EXPECT_DOUBLE_EQ(p[2], 1.0);  // sign(0) = 0
  EXPECT_NEAR(state.first_moment[0], 0.01 * 5.0, 1e-15);
}

TEST(LionTest, InterpolatedMomentumDecidesDirection) {
  auto state = OptimizerState::make(OptimizerHyperparams::lion(0.5), 2);
  state.first_moment.setOnes();
  ParamVector p = ParamVector::Zero(2);
  ParamVector g = ParamVector::Constant(2, -100.0);
  lion_step(state, p, g);  // sign(0.9 * 1 + 0.1 * -100) = -1
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_NEAR(state.first_moment[0], 0.99 - 1.0, 1e-15);
}

TEST(LionTest, DirectionInvariantToGradientScale) {
  Rng rng(3);
  const ParamVector m = testing::random_vector(50, rng);
  const ParamVector g = testing::random_vector(50, rng);
  for (double c : {1e-6, 0.5, 3.0, 1e6}) {
    auto a = OptimizerState::make(OptimizerHyperparams::lion(1e-3), 50);
    auto b = a;
    a.first_moment = m;
    b.first_moment = c * m;
    ParamVector pa = ParamVector::Zero(50);
    ParamVector pb = pa;
    lion_step(a, pa, g);
    lion_step(b, pb, c * g);
    EXPECT_EQ(pa, pb) << c;
  }
}

TEST(EmaTest, DegenerateDecays) {
  ParamVector p = ParamVector::Constant(3, 2.0);
  EmaState zero{ParamVector::Zero(3), 0.0};
  ema_update(zero, p);
  EXPECT_EQ(zero.params, p);

  EmaState frozen{ParamVector::Constant(3, -4.0), 1.0 - 1e-9};
  ema_update(frozen, p);
  for (double v : frozen.params) EXPECT_NEAR(v, -4.0, 1e-8);

  EmaState half{ParamVector::Zero(3), 0.5};
  ema_update(half, p);
  EXPECT_EQ(half.params, ParamVector::Ones(3));
}

TEST(EmaTest, ContractsTowardParams) {
  Rng rng(4);
  for (double decay : {0.1, 0.9, 0.999}) {
    EmaState ema{testing::random_vector(20, rng), decay};
    const ParamVector p = testing::random_vector(20, rng);
    const ParamVector gap = (ema.params - p).cwiseAbs();
    ema_update(ema, p);
    const ParamVector after = (ema.params - p).cwiseAbs();
    for (Eigen::Index i = 0; i < 20; ++i) {
      EXPECT_NEAR(after[i], decay * gap[i], 1e-14);
    }
  }
}

TEST(OptimizerTest, ClippingBoundsGradientNorm) {
  auto hp = OptimizerHyperparams::adam(1.0);
  hp.max_grad_norm = 1.0;
  hp.beta1 = 0.0;
  hp.beta2 = 0.0;
  hp.epsilon = 0.0;
  auto state = OptimizerState::make(hp, 2);
  ParamVector p = ParamVector::Zero(2);
  ParamVector g(2);
  g << 30.0, 40.0;
  apply_update(state, p, g);
  EXPECT_NEAR(state.first_moment[0], 0.6, 1e-15);
  EXPECT_NEAR(state.first_moment[1], 0.8, 1e-15);
}

TEST(OptimizerTest, ParseKinds) {
  EXPECT_EQ(parse_optimizer_kind("adam"), OptimizerKind::kAdam);
  EXPECT_EQ(parse_optimizer_kind("lion"), OptimizerKind::kLion);
  EXPECT_THROW(parse_optimizer_kind("sgd"), Error);
  OptimizerHyperparams bad;
  bad.learning_rate = -1.0;
  EXPECT_THROW(bad.validate(), Error);
}

}  // namespace
}  // namespace cgc::optim
