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

#include "cgc/data.h"

#include <cmath>

#include <gtest/gtest.h>

#include "cgc/error.h"
#include "test_util.h"

namespace cgc::data {
namespace {

using testing::central_difference;

GaussianMixture two_mode() {
  GaussianMixture g;
  Eigen::Matrix2d c1;
  c1 << 0.3, 0.1, 0.1, 0.2;
  Eigen::Matrix2d c2;
  c2 << 0.05, -0.02, -0.02, 0.4;
  g.components.push_back({Eigen::Vector2d(1.5, -0.5), c1, 0.35});
  g.components.push_back({Eigen::Vector2d(-1.0, 2.0), c2, 0.65});
  return g;
}

TEST(SampleTest, DegenerateComponentCollapsesToMean) {
  GaussianMixture g{{{Eigen::Vector2d(3.0, -1.0),
                      1e-12 * Eigen::Matrix2d::Identity(), 1.0}}};
  Rng rng(1);
  const Batch x = sample(g, 1000, rng);
  EXPECT_LE((x.colwise() - g.components[0].mean).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SampleTest, EqualWeightFrequenciesWithinBinomialBounds) {
  const auto s = make_setting(SettingName::kOneToTwo, {}, 10);
  Rng rng(2);
  const Eigen::Index n = 100000;
  std::vector<int> labels;
  const Batch x = sample(s.data, n, rng, &labels);
  ASSERT_EQ(labels.size(), static_cast<std::size_t>(n));
  double ones = 0.0;
  for (int l : labels) ones += l;
  EXPECT_LE(std::abs(ones / n - 0.5), 3.0 * std::sqrt(0.25 / n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& mean = s.data.components[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])].mean;
    ASSERT_LT((x.col(j) - mean).norm(), 0.2 * 8.0);
  }
}

TEST(SampleTest, StandardNormalMoments) {
  const GaussianMixture g = isotropic_mixture({Eigen::Vector2d::Zero()}, 1.0);
  Rng rng(3);
  const Eigen::Index n = 200000;
  const Batch x = sample(g, n, rng);
  for (int d = 0; d < 2; ++d) {
    const double mean = x.row(d).mean();
    const double var = (x.row(d).array() - mean).square().sum() / (n - 1);
    EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_LE(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / n));
  }
}

TEST(SampleTest, Reproducible) {
  const GaussianMixture g = two_mode();
  Rng a(9), b(9);
  EXPECT_EQ(sample(g, 500, a), sample(g, 500, b));
}

TEST(MixtureTest, Validation) {
  GaussianMixture g = two_mode();
  g.components[0].weight = 0.5;  // weights no longer sum to 1
  EXPECT_THROW(g.validate(), Error);
  g = two_mode();
  g.components[1].covariance(0, 0) = -1.0;
  EXPECT_THROW(g.validate(), Error);
  g = two_mode();
  g.components[1].covariance(0, 1) = 0.3;  // asymmetric
  EXPECT_THROW(g.validate(), Error);
  EXPECT_NO_THROW(two_mode().validate());
}

TEST(MixtureTest, RootSecondMoment) {
  const auto s = make_setting(SettingName::kOneToTwo, {2.0, 0.2, 1.0}, 10);
  EXPECT_NEAR(s.data.root_second_moment(), std::sqrt(4.0 + 0.04), 1e-14);
  Rng rng(4);
  const Batch x = sample(two_mode(), 400000, rng);
  const double empirical = std::sqrt(x.squaredNorm() / (2.0 * x.cols()));
  EXPECT_NEAR(two_mode().root_second_moment(), empirical, 5e-3);
}

TEST(ScoreTest, StandardNormal) {
  const GaussianMixture g = isotropic_mixture({Eigen::Vector2d::Zero()}, 1.0);
  Rng rng(5);
  const Batch x = standard_normal(2, 50, rng);
  for (double sigma : {0.0, 0.1, 1.0, 7.0}) {
    const Batch s = analytic_perturbed_score(g, x, sigma);
    EXPECT_LE((s + x / (1.0 + sigma * sigma)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ScoreTest, SymmetricModesGiveZeroAtOrigin) {
  const GaussianMixture g = isotropic_mixture(
      {Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(-2.0, 0.0)}, 0.3);
  for (double sigma : {0.01, 0.5, 3.0}) {
    const Batch s = analytic_perturbed_score(g, Batch::Zero(2, 1), sigma);
    EXPECT_LE(s.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(ScoreTest, MatchesFiniteDifferencesOfLogDensity) {
  const GaussianMixture g = two_mode();
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d x = 2.5 * standard_normal(2, 1, rng).col(0);
    const double sigma = std::exp(-4.0 + 5.0 * u(rng));
    const Eigen::VectorXd s1 = Eigen::VectorXd::Constant(1, sigma);
    const Eigen::VectorXd fd = central_difference(
        [&](const Eigen::VectorXd& q) {
          return perturbed_log_density(g, q, s1)[0];
        },
        x, 1e-6);
    const Eigen::VectorXd an = analytic_perturbed_score(g, x, sigma).col(0);
    EXPECT_LE(testing::relative_error(an, fd), 1e-6) << trial;
  }
}

TEST(ScoreTest, LogDensityOfSingleGaussian) {
  const GaussianMixture g = isotropic_mixture({Eigen::Vector2d::Zero()}, 1.0);
  Batch x(2, 1);
  x << 0.3, -1.2;
  const double sigma = 0.5;
  const double var = 1.0 + sigma * sigma;
  const double expected =
      -std::log(2.0 * M_PI * var) - x.squaredNorm() / (2.0 * var);
  EXPECT_NEAR(perturbed_log_density(g, x, Eigen::VectorXd::Constant(1, sigma))[0],
              expected, 1e-14);
}

TEST(SettingTest, Shapes) {
  const auto a = make_setting(SettingName::kOneToTwo, {}, 10000);
  EXPECT_EQ(a.noise.components.size(), 1u);
  EXPECT_EQ(a.data.components.size(), 2u);
  const auto b = make_setting(SettingName::kTwoToTwo, {}, 10000);
  ASSERT_EQ(b.noise.components.size(), 2u);
  EXPECT_EQ(b.noise.components[0].weight, b.noise.components[1].weight);
  EXPECT_EQ(b.data.components[0].mean, Eigen::Vector2d(2.0, 2.0));
  EXPECT_EQ(b.noise.components[0].mean, Eigen::Vector2d(-2.0, -2.0));
  EXPECT_EQ(parse_setting_name("2m-2m"), SettingName::kTwoToTwo);
  EXPECT_THROW(parse_setting_name("3m"), Error);
}

}  // namespace
}  // namespace cgc::data
