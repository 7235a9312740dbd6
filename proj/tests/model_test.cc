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

#include "cgc/model.h"

#include <cmath>

#include <gtest/gtest.h>

#include "cgc/error.h"
#include "test_util.h"

namespace cgc {
namespace {

using testing::central_difference;
using testing::relative_error;

ConsistencyModel small_model(Rng& rng, double param_scale) {
  ConsistencyModel m;
  m.spec = {2, 8, 2, 2};
  m.params = testing::random_vector(
      static_cast<Eigen::Index>(m.spec.param_count()), rng, param_scale);
  m.sigma_data = 0.7;
  m.sigma_min = 0.002;
  m.sigma_max = 3.0;
  return m;
}

Eigen::VectorXd random_sigmas(const ConsistencyModel& m, Eigen::Index n,
                              Rng& rng) {
  std::uniform_real_distribution<double> u(m.sigma_min, m.sigma_max);
  Eigen::VectorXd s(n);
  for (auto& v : s) v = u(rng);
  return s;
}

TEST(ConsistencyModelTest, BoundaryCoefficientsExact) {
  ConsistencyModel m;
  m.sigma_data = 2.01;
  m.sigma_min = 0.001;
  EXPECT_EQ(m.c_skip(m.sigma_min), 1.0);
  EXPECT_EQ(m.c_out(m.sigma_min), 0.0);
}

TEST(ConsistencyModelTest, BoundaryIdentityForRandomParams) {
  Rng rng(1);
  for (double scale : {0.1, 1.0, 5.0}) {
    const ConsistencyModel m = small_model(rng, scale);
    const Batch x = 3.0 * standard_normal(2, 1000, rng);
    const Batch f = consistency_eval(
        m, m.params, x, Eigen::VectorXd::Constant(1000, m.sigma_min));
    EXPECT_LE((f - x).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConsistencyModelTest, ZeroFinalLayerGivesSkipOnly) {
  Rng rng(2);
  ConsistencyModel m = small_model(rng, 1.0);
  m.params = nn::init_params(m.spec, rng);
  const Batch x = standard_normal(2, 20, rng);
  const Eigen::VectorXd s = random_sigmas(m, 20, rng);
  const Batch f = consistency_eval(m, m.params, x, s);
  for (Eigen::Index j = 0; j < 20; ++j) {
    EXPECT_EQ(f.col(j), x.col(j) * m.c_skip(s[j]));
  }
}

TEST(ConsistencyModelTest, SkipAtSigmaData) {
  ConsistencyModel m;
  m.sigma_data = 0.5;
  m.sigma_min = 0.002;
  // 0.25 / (0.498^2 + 0.25)
  EXPECT_NEAR(m.c_skip(0.5), 0.25 / (0.248004 + 0.25), 1e-15);
  EXPECT_NEAR(m.c_out(0.5), 0.5 * 0.498 / std::sqrt(0.5), 1e-15);
}

TEST(ConsistencyModelTest, SigmaOutsideRangeIsUsageError) {
  Rng rng(3);
  const ConsistencyModel m = small_model(rng, 1.0);
  const Batch x = standard_normal(2, 2, rng);
  Eigen::VectorXd s(2);
  s << 0.5, m.sigma_max * 1.01;
  try {
    consistency_eval(m, m.params, x, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(ConsistencyModelTest, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(40 + seed);
    const ConsistencyModel m = small_model(rng, 0.6);
    const Batch x = standard_normal(2, 4, rng);
    const Eigen::VectorXd s = random_sigmas(m, 4, rng);
    const Batch target = standard_normal(2, 4, rng);
    for (const DistanceFn fn : {DistanceFn::squared_l2(),
                                DistanceFn::pseudo_huber(0.3)}) {
      auto out = consistency_output(m, x, s);
      const Batch cot = distance_grad(fn, target, out.output);
      const nn::Gradients g =
          consistency_backward(m, m.params, std::move(out), cot);
      const Eigen::VectorXd fd = central_difference(
          [&](const Eigen::VectorXd& p) {
            return distance(fn, target, consistency_eval(m, p, x, s)).sum();
          },
          m.params);
      EXPECT_LE(relative_error(g.params, fd), 1e-5);
      const Eigen::VectorXd fdx = central_difference(
          [&](const Eigen::VectorXd& q) {
            return distance(fn, target,
                            consistency_eval(m, m.params,
                                             q.reshaped(2, 4), s))
                .sum();
          },
          x.reshaped());
      EXPECT_LE(relative_error(g.input.reshaped(), fdx), 1e-5);
    }
  }
}

TEST(DistanceTest, SquaredL2) {
  Batch a(2, 2), b(2, 2);
  a << 0, 1, 0, 1;
  b << 3, 1, 4, 1;
  const Eigen::VectorXd d = distance(DistanceFn::squared_l2(), a, b);
  EXPECT_EQ(d[0], 25.0);
  EXPECT_EQ(d[1], 0.0);
}

TEST(DistanceTest, PseudoHuber) {
  const DistanceFn fn = DistanceFn::pseudo_huber(1.0);
  Batch a = Batch::Zero(2, 1);
  EXPECT_EQ(distance(fn, a, a)[0], 0.0);
  Batch b(2, 1);
  b << 1e-3, 0.0;
  // sqrt(1 + d^2) - 1 = d^2 / 2 - d^4 / 8 + d^6 / 16 - ...
  EXPECT_NEAR(distance(fn, a, b)[0], 1e-6 / 2.0 - 1e-12 / 8.0 + 1e-18 / 16.0, 1e-21);
  b << 3.0, 4.0;
  EXPECT_NEAR(distance(fn, a, b)[0], std::sqrt(26.0) - 1.0, 1e-14);
  double prev = -1.0;
  for (double r = 0.0; r < 10.0; r += 0.1) {
    b << r, 0.0;
    const double d = distance(fn, a, b)[0];
    EXPECT_GT(d, prev);
    EXPECT_EQ(d, distance(fn, b, a)[0]);
    prev = d;
  }
}

TEST(DistanceTest, ParseNames) {
  EXPECT_EQ(parse_distance("l2", 0.0).kind, DistanceKind::kSquaredL2);
  EXPECT_EQ(parse_distance("pseudo_huber", 0.1).kind, DistanceKind::kPseudoHuber);
  EXPECT_THROW(parse_distance("pseudo_huber", 0.0), Error);
  EXPECT_THROW(parse_distance("l1", 0.0), Error);
}

}  // namespace
}  // namespace cgc
