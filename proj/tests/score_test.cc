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

#include "cgc/score.h"

#include <cmath>

#include <gtest/gtest.h>

#include "cgc/error.h"
#include "test_util.h"

namespace cgc {
namespace {

using testing::central_difference;
using testing::relative_error;

ScoreFn gaussian_score() {
  return [](const Batch& x, const Eigen::VectorXd& sigma) -> Batch {
    return -x * (1.0 + sigma.array().square()).inverse().matrix().asDiagonal();
  };
}

TEST(DsmTest, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  ScoreModel m{{2, 8, 2, 2}, {}, 0.8};
  for (int trial = 0; trial < 4; ++trial) {
    const ParamVector p = testing::random_vector(
        static_cast<Eigen::Index>(m.spec.param_count()), rng, 0.5);
    const Batch x = standard_normal(2, 16, rng);
    const Batch z = standard_normal(2, 16, rng);
    Eigen::VectorXd sigma(16);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (auto& s : sigma) s = u(rng);
    const auto r = dsm_loss(m, p, x, z, sigma);
    const auto fd = central_difference(
        [&](const Eigen::VectorXd& q) { return dsm_loss(m, q, x, z, sigma).loss; }, p);
    EXPECT_LE(relative_error(r.grad, fd), 1e-6);
  }
}

TEST(DsmTest, ShapeMismatch) {
  ScoreModel m{{2, 4, 1, 2}, ParamVector::Zero(static_cast<Eigen::Index>(nn::NetworkSpec{2, 4, 1, 2}.param_count())), 1.0};
  EXPECT_THROW(dsm_loss(m, m.params, Batch::Zero(2, 3), Batch::Zero(2, 4),
                        Eigen::VectorXd::Ones(3)),
               Error);
}

TEST(EulerTest, ClosedFormForStandardGaussian) {
  Rng rng(2);
  const Batch x = standard_normal(2, 10, rng);
  const double s_i = 0.3, s_next = 0.7;
  const Batch expected = x * (1.0 + (s_i - s_next) * s_next / (1.0 + s_next * s_next));
  const Batch got = euler_pfode_update(gaussian_score(), x, s_i, s_next);
  EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EulerTest, ZeroScoreIsIdentity) {
  Rng rng(3);
  const Batch x = standard_normal(2, 10, rng);
  const ScoreFn zero = [](const Batch& y, const Eigen::VectorXd&) -> Batch {
    return Batch::Zero(y.rows(), y.cols());
  };
  EXPECT_EQ(euler_pfode_update(zero, x, 0.1, 0.9), x);
}

TEST(EulerTest, LinearInScore) {
  Rng rng(4);
  const Batch x = standard_normal(2, 10, rng);
  const Batch a = standard_normal(2, 10, rng);
  const Batch b = standard_normal(2, 10, rng);
  const auto constant = [](Batch v) {
    return ScoreFn([v](const Batch&, const Eigen::VectorXd&) -> Batch { return v; });
  };
  const Batch da = euler_pfode_update(constant(a), x, 0.2, 0.5) - x;
  const Batch db = euler_pfode_update(constant(b), x, 0.2, 0.5) - x;
  const Batch dab = euler_pfode_update(constant(a + b), x, 0.2, 0.5) - x;
  EXPECT_LE((dab - da - db).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EulerTest, RejectsUpwardStep) {
  try {
    euler_pfode_update(gaussian_score(), Batch::Zero(2, 1), 0.5, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(PfodeSolveTest, SingleStepEqualsUpdate) {
  Rng rng(5);
  const Batch x = standard_normal(2, 10, rng);
  const auto sched = build_grid(0.01, 2.0, 7.0, 1);
  EXPECT_EQ(pfode_solve(gaussian_score(), x, sched),
            euler_pfode_update(gaussian_score(), x, sched.sigma(0), sched.sigma(1)));
}

TEST(PfodeSolveTest, FineGridTracksExactFlow) {
  // For N(0, I) data the flow scales points by sqrt(1 + sigma^2).
  Rng rng(6);
  const Batch x = standard_normal(2, 10, rng);
  const auto sched = build_grid(0.001, 1.0, 3.0, 4000);
  const Batch got = pfode_solve(gaussian_score(), x, sched);
  const double ratio = std::sqrt((1.0 + 1e-6) / 2.0);
  EXPECT_LE((got - ratio * x).cwiseAbs().maxCoeff(), 1e-3 * x.cwiseAbs().maxCoeff());
}

TEST(PfodeSolveTest, AnalyticScoreIsSymmetric) {
  // Mirror-symmetric mixture: the flow commutes with the reflection.
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 10);
  const auto score = analytic_score_fn(setting.data);
  Rng rng(7);
  Batch x = standard_normal(2, 20, rng);
  Batch mirrored = x;
  mirrored.row(1) *= -1.0;
  const auto sched = build_grid(0.001, 1.0, 3.0, 30);
  Batch a = pfode_solve(score, x, sched);
  const Batch b = pfode_solve(score, mirrored, sched);
  a.row(1) *= -1.0;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PfodeSolveTest, DivergenceIsNumericError) {
  const ScoreFn bad = [](const Batch& y, const Eigen::VectorXd&) -> Batch {
    return Batch::Constant(y.rows(), y.cols(), -1e12);
  };
  try {
    pfode_solve(bad, Batch::Ones(2, 3), build_grid(0.001, 1.0, 3.0, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(ScoreTrainingTest, DeterministicAndFinite) {
  Rng rng(8);
  const Batch pool = standard_normal(2, 1000, rng);
  ScoreTrainConfig cfg;
  cfg.spec = {2, 16, 2, 2};
  cfg.steps = 50;
  cfg.batch_size = 64;
  cfg.seed = 3;
  int calls = 0;
  const auto a = train_score(cfg, pool, 1.0, [&](std::int64_t, double l) {
    ++calls;
    EXPECT_TRUE(std::isfinite(l));
  });
  const auto b = train_score(cfg, pool, 1.0);
  EXPECT_EQ(calls, 50);
  EXPECT_EQ(a.params, b.params);
  EXPECT_TRUE(a.params.allFinite());
}

TEST(ScoreFitTest, ExactAndDistortedScores) {
  Rng rng(9);
  const Batch x = standard_normal(2, 200, rng);
  const Eigen::VectorXd sigma = Eigen::VectorXd::Constant(200, 0.5);
  const ScoreFn ref = gaussian_score();
  const auto same = score_fit(ref, ref, x, sigma);
  EXPECT_NEAR(same.angular_error, 0.0, 1e-24);
  EXPECT_EQ(same.magnitude_error, 0.0);
  EXPECT_EQ(same.n, 200);
  const ScoreFn doubled = [&](const Batch& y, const Eigen::VectorXd& s) -> Batch {
    return 2.0 * ref(y, s);
  };
  const auto twice = score_fit(doubled, ref, x, sigma);
  EXPECT_NEAR(twice.angular_error, 0.0, 1e-24);
  EXPECT_NEAR(twice.magnitude_error, 1.0, 1e-12);
  const ScoreFn rotated = [&](const Batch& y, const Eigen::VectorXd& s) -> Batch {
    const Batch r = ref(y, s);
    Batch out(2, r.cols());
    out.row(0) = -r.row(1);
    out.row(1) = r.row(0);
    return out;
  };
  const auto quarter = score_fit(rotated, ref, x, sigma);
  EXPECT_NEAR(quarter.angular_error, M_PI * M_PI / 4.0, 1e-12);
  EXPECT_NEAR(quarter.magnitude_error, 0.0, 1e-24);
}

TEST(ScoreFitTest, TrainedScoreTracksMixtureScore) {
  // Small network, short run: the held-out fit on 1m-2m must land inside
  // the default thresholds over the levels the diagnostics rely on.
  const auto setting = data::make_setting(data::SettingName::kOneToTwo, {}, 4000);
  Rng rng(10);
  const Batch pool = data::sample(setting.data, 4000, rng);
  ScoreTrainConfig cfg;
  cfg.spec = {2, 64, 3, 2};
  cfg.steps = 3000;
  cfg.batch_size = 256;
  cfg.learning_rate = 1e-3;
  cfg.ema_decay = 0.99;
  cfg.seed = 1;
  const ScoreModel m = train_score(cfg, pool, setting.data.root_second_moment());
  Rng fit_rng(11);
  const auto fit = score_fit_to_mixture(model_score_fn(m), setting.data,
                                        cfg.fit_sigma_min, cfg.sigma_max, 8, 2000,
                                        fit_rng);
  RecordProperty("angular_error", std::to_string(fit.angular_error));
  RecordProperty("magnitude_error", std::to_string(fit.magnitude_error));
  EXPECT_LE(fit.angular_error, cfg.max_angular_error);
  EXPECT_LE(fit.magnitude_error, cfg.max_magnitude_error);
  // An untrained model is far off.
  ScoreModel untrained = m;
  untrained.params.setZero();
  Rng fit_rng2(11);
  const auto bad = score_fit_to_mixture(model_score_fn(untrained), setting.data,
                                        cfg.fit_sigma_min, cfg.sigma_max, 8, 2000,
                                        fit_rng2);
  EXPECT_GT(bad.angular_error + bad.magnitude_error,
            10.0 * (fit.angular_error + fit.magnitude_error));
}

}  // namespace
}  // namespace cgc
