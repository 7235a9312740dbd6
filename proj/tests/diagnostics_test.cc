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

#include "cgc/diagnostics.h"

#include <cmath>
#include <numbers>
#include <string>

#include <gtest/gtest.h>

#include "cgc/error.h"
#include "cgc/train.h"
#include "test_util.h"

namespace cgc {
namespace {

TEST(VarianceTest, TwoSymmetricSamples) {
  nn::GradientMoments m;
  const Eigen::VectorXd v = Eigen::Vector3d(0.5, -2.0, 3.0);
  m.sum = v - v;
  m.sum_sq = 2.0 * v.array().square().matrix();
  m.count = 2;
  EXPECT_NEAR(variance_from_moments(m), 2.0 * v.squaredNorm() / 3.0, 1e-14);
  m.count = 1;
  EXPECT_EQ(variance_from_moments(m), 0.0);
}

struct Fixture {
  ConsistencyModel model;
  NoiseSchedule schedule = build_grid(0.001, 1.0, 3.0, 10);
  ParamVector params;

  Fixture() {
    model.spec = {2, 8, 2, 2};
    model.sigma_data = 2.0;
    Rng rng(1);
    params = testing::random_vector(
        static_cast<Eigen::Index>(model.spec.param_count()), rng, 0.3);
  }
};

TEST(VarianceTest, IdenticalSamplesGiveZero) {
  Fixture f;
  Rng rng(2);
  const Batch x = standard_normal(2, 1, rng).replicate(1, 16);
  const Batch z = standard_normal(2, 1, rng).replicate(1, 16);
  CouplingBatch b{x, z, std::vector<int>(16, 4), Provenance::kIndependent};
  const auto r = gradient_variance(f.model, f.params, b, {}, f.schedule,
                                   DistanceFn::squared_l2());
  const auto g = consistency_loss_step(f.model, f.params, b, {}, f.schedule,
                                       DistanceFn::squared_l2());
  EXPECT_LE(r.variance, 1e-12 * g.grad.squaredNorm() / g.grad.size());
  EXPECT_EQ(r.estimator, "mean_param_per_sample_variance");
}

TEST(VarianceTest, MatchesSingleSampleGradients) {
  Fixture f;
  Rng rng(3);
  const Eigen::Index n = 12;
  const auto ic = sample_ic(standard_normal(2, n, rng), standard_normal(2, n, rng),
                            uniform_timesteps(f.schedule), rng);
  const auto r = gradient_variance(f.model, f.params, ic, {}, f.schedule,
                                   DistanceFn::pseudo_huber(0.03), 5);
  EXPECT_EQ(r.step, 5);
  Eigen::MatrixXd g(f.params.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    CouplingBatch one{ic.x.col(j), ic.z.col(j),
                      {ic.timestep[static_cast<std::size_t>(j)]},
                      Provenance::kIndependent};
    g.col(j) = consistency_loss_step(f.model, f.params, one, {}, f.schedule,
                                     DistanceFn::pseudo_huber(0.03))
                   .grad;
  }
  const Eigen::VectorXd mean = g.rowwise().mean();
  const Eigen::VectorXd var =
      (g.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(n - 1);
  EXPECT_NEAR(r.variance, var.mean(), 1e-10 * var.mean());
}

TEST(VarianceTest, NeedsTwoSamples) {
  Fixture f;
  CouplingBatch one{Batch::Zero(2, 1), Batch::Zero(2, 1), {0},
                    Provenance::kIndependent};
  try {
    gradient_variance(f.model, f.params, one, {}, f.schedule,
                      DistanceFn::squared_l2());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

// Per-sample variance over B predicts the spread of full-batch gradients
// drawn independently at the same parameters.
TEST(VarianceTest, PredictsRepeatedBatchSpread) {
  Fixture f;
  Rng rng(11);
  const Eigen::Index batch = 16;
  const int repeats = 400;
  const auto weights = uniform_timesteps(f.schedule);
  Eigen::MatrixXd means(f.params.size(), repeats);
  double predicted = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto ic = sample_ic(standard_normal(2, batch, rng),
                              standard_normal(2, batch, rng), weights, rng);
    means.col(r) = consistency_loss_step(f.model, f.params, ic, {}, f.schedule,
                                         DistanceFn::squared_l2())
                       .grad;
    predicted += gradient_variance(f.model, f.params, ic, {}, f.schedule,
                                   DistanceFn::squared_l2())
                     .variance;
  }
  predicted /= static_cast<double>(repeats * batch);
  const Eigen::VectorXd centre = means.rowwise().mean();
  const double observed =
      ((means.colwise() - centre).rowwise().squaredNorm() /
       static_cast<double>(repeats - 1))
          .mean();
  RecordProperty("ratio", std::to_string(observed / predicted));
  EXPECT_NEAR(observed / predicted, 1.0, 0.25);
}

EndpointFn zero_endpoint() {
  return [](const Batch& x, const Eigen::VectorXd&) -> Batch {
    return Batch::Zero(x.rows(), x.cols());
  };
}

TEST(TransportTest, IndependentCostClosedForm) {
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 6);
  Rng rng(4);
  TransportOptions opt;
  opt.n = 40000;
  opt.ic_only = true;
  const auto r = transport_cost(zero_endpoint(), setting, {}, sched, opt, rng);
  ASSERT_EQ(r.ic_cost.size(), 7u);
  EXPECT_TRUE(r.gc_cost.empty());
  for (int i = 0; i <= 6; ++i) {
    const double s = sched.sigma(i);
    // EDM: |x - x_i|^2 = s^2 |z|^2 with E|z|^2 = 2.
    EXPECT_NEAR(r.ic_cost[static_cast<std::size_t>(i)], 2.0 * s * s,
                4.0 * r.ic_stderr[static_cast<std::size_t>(i)] + 1e-15);
    EXPECT_EQ(r.sigma[static_cast<std::size_t>(i)], s);
  }
}

TEST(TransportTest, EdmCostIsEndpointIndependent) {
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 5);
  Fixture f;
  Rng rng(5);
  TransportOptions opt;
  opt.n = 500;
  opt.keep_samples = true;
  const auto r = transport_cost(consistency_endpoint(f.model, f.params), setting,
                                {}, sched, opt, rng);
  ASSERT_EQ(r.gc_samples.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    ASSERT_EQ(r.gc_samples[i].size(), 500u);
    for (std::size_t j = 0; j < 500; ++j) {
      EXPECT_NEAR(r.gc_samples[i][j], r.ic_samples[i][j],
                  1e-12 * (1.0 + r.ic_samples[i][j]));
    }
  }
}

TEST(TransportTest, BridgeZeroEndpointClosedForm) {
  // With x_hat = 0: x_tilde = s z, so the cost is s^2 |z|^2.
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 4);
  Rng rng(6);
  TransportOptions opt;
  opt.n = 40000;
  const auto r = transport_cost(zero_endpoint(), setting,
                                {ProcessKind::kBridgeGaussian}, sched, opt, rng);
  for (std::size_t i = 0; i < 5; ++i) {
    const double s = r.sigma[i];
    EXPECT_NEAR(r.gc_cost[i], 2.0 * s * s, 4.0 * r.gc_stderr[i] + 1e-15);
  }
  // The data endpoint sits far from the noise, so IC pays more at the top.
  EXPECT_GT(r.ic_cost.back(), 3.0 * r.gc_cost.back());
}

TEST(PfodeTest, ZeroScoreMatchesClosedForm) {
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 8);
  const auto weights = timestep_weights(sched, -1.1, 2.0);
  const ScoreFn zero = [](const Batch& x, const Eigen::VectorXd&) -> Batch {
    return Batch::Zero(x.rows(), x.cols());
  };
  Fixture f;
  Rng rng(7);
  const Eigen::Index n = 100000;
  const auto r = pfode_distance(consistency_endpoint(f.model, f.params), zero,
                                setting, {}, sched, weights, n, rng, 3);
  EXPECT_EQ(r.step, 3);
  EXPECT_EQ(r.n, n);
  // Zero score: distance is (s_hi - s_lo)|z| for either coupling.
  EXPECT_NEAR(r.gc_distance, r.ic_distance, 1e-12 * r.ic_distance);
  double expected = 0.0;
  for (int t = 0; t < sched.n_steps; ++t) {
    expected += weights.weights[static_cast<std::size_t>(t)] *
                (sched.sigma(t + 1) - sched.sigma(t));
  }
  expected *= std::sqrt(std::numbers::pi / 2.0);
  EXPECT_NEAR(r.ic_distance, expected, 4.0 * r.ic_stderr);
  double pooled = 0.0;
  Eigen::Index total = 0;
  for (std::size_t t = 0; t < r.count_by_timestep.size(); ++t) {
    pooled += r.ic_by_timestep[t] * static_cast<double>(r.count_by_timestep[t]);
    total += r.count_by_timestep[t];
  }
  EXPECT_EQ(total, n);
  EXPECT_NEAR(pooled / static_cast<double>(n), r.ic_distance, 1e-12);
}

// One Gaussian N(m, s^2 I) with its exact score: x_i - x_i^Phi is isotropic
// Gaussian with per-coordinate std |ds| s / sqrt(s^2 + sigma_hi^2).
TEST(PfodeTest, SingleGaussianClosedForm) {
  auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const double s = 0.7;
  setting.data = data::isotropic_mixture({Eigen::Vector2d(1.5, -0.5)}, s);
  const auto sched = build_grid(0.001, 1.0, 3.0, 8);
  const auto weights = timestep_weights(sched, -1.1, 2.0);
  Fixture f;
  Rng rng(12);
  const auto r = pfode_distance(consistency_endpoint(f.model, f.params),
                                analytic_score_fn(setting.data), setting, {},
                                sched, weights, 100000, rng);
  double expected = 0.0;
  for (int t = 0; t < sched.n_steps; ++t) {
    const double hi = sched.sigma(t + 1);
    expected += weights.weights[static_cast<std::size_t>(t)] *
                (hi - sched.sigma(t)) * s / std::sqrt(s * s + hi * hi);
  }
  expected *= std::sqrt(std::numbers::pi / 2.0);
  EXPECT_NEAR(r.ic_distance, expected, 4.0 * r.ic_stderr);
}

// With a constant score field the pair difference depends on z alone, so
// an identity generator reproduces the IC distances exactly.
TEST(PfodeTest, IdentityGeneratorMatchesIc) {
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 8);
  const ScoreFn constant = [](const Batch& x, const Eigen::VectorXd&) -> Batch {
    return Eigen::Vector2d(0.3, -1.2).replicate(1, x.cols());
  };
  const EndpointFn identity = [](const Batch& x, const Eigen::VectorXd&) {
    return Batch(x);
  };
  Rng rng(13);
  const auto r = pfode_distance(identity, constant, setting, {}, sched,
                                uniform_timesteps(sched), 5000, rng);
  EXPECT_GT(r.ic_distance, 0.0);
  EXPECT_NEAR(r.gc_distance, r.ic_distance, 1e-12 * r.ic_distance);
  for (std::size_t t = 0; t < r.ic_by_timestep.size(); ++t) {
    EXPECT_NEAR(r.gc_by_timestep[t], r.ic_by_timestep[t],
                1e-12 * (1.0 + r.ic_by_timestep[t]));
  }
}

TEST(PfodeTest, BridgeIsUnsupported) {
  const auto setting = data::make_setting(data::SettingName::kTwoToTwo, {}, 10);
  const auto sched = build_grid(0.001, 1.0, 3.0, 8);
  Rng rng(8);
  try {
    pfode_distance(zero_endpoint(), analytic_score_fn(setting.data), setting,
                   {ProcessKind::kBridgeGaussian}, sched, uniform_timesteps(sched),
                   10, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupported);
  }
}

double brute_energy(const Batch& a, const Batch& b) {
  auto mean_dist = [](const Batch& p, const Batch& q, bool skip_diag) {
    double s = 0.0;
    double count = 0.0;
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
      for (Eigen::Index j = 0; j < q.cols(); ++j) {
        if (skip_diag && i == j) continue;
        s += (p.col(i) - q.col(j)).norm();
        count += 1.0;
      }
    }
    return count > 0.0 ? s / count : 0.0;
  };
  return 2.0 * mean_dist(a, b, false) - mean_dist(a, a, true) - mean_dist(b, b, true);
}

TEST(EnergyDistanceTest, PointMasses) {
  const Batch p = Eigen::Vector2d(1.0, 2.0);
  const Batch q = Eigen::Vector2d(4.0, 6.0);
  EXPECT_DOUBLE_EQ(energy_distance(p, q), 10.0);
  EXPECT_EQ(energy_distance(p, p), 0.0);
}

TEST(EnergyDistanceTest, MatchesBruteForceAndIsSymmetric) {
  Rng rng(9);
  const Batch a = standard_normal(2, 37, rng);
  const Batch b = standard_normal(2, 53, rng).array() + 0.5;
  EXPECT_NEAR(energy_distance(a, b), brute_energy(a, b), 1e-12);
  EXPECT_NEAR(energy_distance(a, b), energy_distance(b, a), 1e-12);
}

TEST(EnergyDistanceTest, SameDistributionIsNearZero) {
  Rng rng(10);
  const Batch a = standard_normal(2, 2000, rng);
  const Batch b = standard_normal(2, 2000, rng);
  const Batch c = standard_normal(2, 2000, rng).array() + 1.0;
  EXPECT_LT(std::abs(energy_distance(a, b)), 0.01);
  EXPECT_LT(std::abs(energy_distance(a, a)), 0.01);
  EXPECT_GT(energy_distance(a, c), 0.3);
}

TEST(EnergyDistanceTest, Errors) {
  EXPECT_THROW(energy_distance(Batch::Zero(2, 3), Batch::Zero(3, 3)), Error);
  EXPECT_THROW(energy_distance(Batch::Zero(2, 0), Batch::Zero(2, 3)), Error);
}

TEST(ModeBalanceTest, NearestMeanFractions) {
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  Batch s(2, 4);
  s.col(0) = setting.data.components[0].mean;
  s.col(1) = setting.data.components[1].mean;
  s.col(2) = setting.data.components[1].mean * 1.5;
  s.col(3) = setting.data.components[1].mean + Eigen::Vector2d(0.1, 0.0);
  const auto frac = mode_balance(s, setting.data);
  ASSERT_EQ(frac.size(), 2u);
  EXPECT_EQ(frac[0], 0.25);
  EXPECT_EQ(frac[1], 0.75);
  EXPECT_THROW(mode_balance(s, setting.noise), Error);
}

}  // namespace
}  // namespace cgc
