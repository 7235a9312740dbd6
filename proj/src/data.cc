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
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc::data {
namespace {

// Per-component pieces of log N(x; mu_k, Sigma_k + sigma^2 I) and its
// gradient for one sample.
struct ComponentTerm {
  double log_weighted_density;
  Eigen::VectorXd score;
};

ComponentTerm component_term(const MixtureComponent& c, const Eigen::VectorXd& x,
                             double sigma) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd cov = c.covariance;
  cov.diagonal().array() += sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd diff = x - c.mean;
  const Eigen::VectorXd solved = llt.solve(diff);
  const double log_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_norm =
      -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
              log_det);
  return {std::log(c.weight) + log_norm - 0.5 * diff.dot(solved), -solved};
}

void check_batch(const GaussianMixture& dist, const Batch& x,
                 const Eigen::VectorXd& sigma) {
  if (x.rows() != dist.dim()) {
    fail(ErrorKind::kStructural,
         fmt::format("points have dimension {}, mixture {}", x.rows(),
                     dist.dim()));
  }
  if (sigma.size() != x.cols()) {
    fail(ErrorKind::kStructural, "one noise level per point required");
  }
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    if (!(sigma[j] >= 0.0)) {
      fail(ErrorKind::kUsage,
           fmt::format("noise level {} must be nonnegative", sigma[j]));
    }
  }
}

}  // namespace

Eigen::Index GaussianMixture::dim() const {
  return components.empty() ? 0 : components.front().mean.size();
}

void GaussianMixture::validate() const {
  if (components.empty()) fail(ErrorKind::kConfig, "mixture has no components");
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (c.mean.size() != dim() || c.covariance.rows() != dim() ||
        c.covariance.cols() != dim()) {
      fail(ErrorKind::kConfig,
           fmt::format("mixture component {} has inconsistent dimensions", k));
    }
    if (!(c.weight > 0.0)) {
      fail(ErrorKind::kConfig,
           fmt::format("mixture component {} has weight {}", k, c.weight));
    }
    if (!c.covariance.isApprox(c.covariance.transpose()) ||
        Eigen::LLT<Eigen::MatrixXd>(c.covariance).info() != Eigen::Success) {
      fail(ErrorKind::kConfig,
           fmt::format("mixture component {} covariance is not SPD", k));
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    fail(ErrorKind::kConfig,
         fmt::format("mixture weights sum to {}, expected 1", total));
  }
}

double GaussianMixture::root_second_moment() const {
  double second = 0.0;
  for (const auto& c : components) {
    second += c.weight * (c.mean.squaredNorm() + c.covariance.trace());
  }
  return std::sqrt(second / static_cast<double>(dim()));
}

GaussianMixture isotropic_mixture(const std::vector<Eigen::VectorXd>& means,
                                  double component_std) {
  GaussianMixture m;
  for (const auto& mu : means) {
    m.components.push_back(
        {mu,
         Eigen::MatrixXd::Identity(mu.size(), mu.size()) *
             (component_std * component_std),
         1.0 / static_cast<double>(means.size())});
  }
  return m;
}

Batch sample(const GaussianMixture& dist, Eigen::Index n, Rng& rng) {
  return sample(dist, n, rng, nullptr);
}

Batch sample(const GaussianMixture& dist, Eigen::Index n, Rng& rng,
             std::vector<int>* labels) {
  dist.validate();
  std::vector<double> weights;
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& c : dist.components) {
    weights.push_back(c.weight);
    factors.push_back(Eigen::LLT<Eigen::MatrixXd>(c.covariance).matrixL());
  }
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = dist.dim();
  Batch out(d, n);
  if (labels != nullptr) labels->assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd eps(d);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int k = dist.components.size() == 1 ? 0 : pick(rng);
    for (Eigen::Index r = 0; r < d; ++r) eps[r] = normal(rng);
    out.col(j) = dist.components[static_cast<std::size_t>(k)].mean +
                 factors[static_cast<std::size_t>(k)] * eps;
    if (labels != nullptr) (*labels)[static_cast<std::size_t>(j)] = k;
  }
  return out;
}

Eigen::VectorXd perturbed_log_density(const GaussianMixture& dist,
                                      const Batch& x,
                                      const Eigen::VectorXd& sigma) {
  check_batch(dist, x, sigma);
  Eigen::VectorXd out(x.cols());
  std::vector<double> logs(dist.components.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dist.components.size(); ++k) {
      logs[k] = component_term(dist.components[k], x.col(j), sigma[j])
                    .log_weighted_density;
      peak = std::max(peak, logs[k]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - peak);
    out[j] = peak + std::log(acc);
  }
  return out;
}

Batch analytic_perturbed_score(const GaussianMixture& dist, const Batch& x,
                               const Eigen::VectorXd& sigma) {
  check_batch(dist, x, sigma);
  Batch out(x.rows(), x.cols());
  std::vector<ComponentTerm> terms;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    terms.clear();
    double peak = -std::numeric_limits<double>::infinity();
    for (const auto& c : dist.components) {
      terms.push_back(component_term(c, x.col(j), sigma[j]));
      peak = std::max(peak, terms.back().log_weighted_density);
    }
    double norm = 0.0;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    for (const auto& t : terms) {
      const double r = std::exp(t.log_weighted_density - peak);
      norm += r;
      acc += r * t.score;
    }
    out.col(j) = acc / norm;
  }
  return out;
}

Batch analytic_perturbed_score(const GaussianMixture& dist, const Batch& x,
                               double sigma) {
  return analytic_perturbed_score(dist, x,
                                  Eigen::VectorXd::Constant(x.cols(), sigma));
}

SettingName parse_setting_name(const std::string& name) {
  if (name == "1m-2m") return SettingName::kOneToTwo;
  if (name == "2m-2m") return SettingName::kTwoToTwo;
  fail(ErrorKind::kConfig,
       fmt::format("unknown setting '{}' (expected 1m-2m or 2m-2m)", name));
}

std::string to_string(SettingName name) {
  return name == SettingName::kOneToTwo ? "1m-2m" : "2m-2m";
}

ExperimentSetting make_setting(SettingName name, const SettingGeometry& g,
                               Eigen::Index n_samples) {
  if (!(g.mode_offset > 0.0) || !(g.component_std > 0.0) ||
      !(g.noise_std > 0.0) || n_samples < 1) {
    fail(ErrorKind::kConfig,
         fmt::format("invalid setting geometry: offset {} std {} noise std {} "
                     "samples {}",
                     g.mode_offset, g.component_std, g.noise_std, n_samples));
  }
  const double m = g.mode_offset;
  ExperimentSetting s;
  s.name = name;
  s.n_samples = n_samples;
  s.data = isotropic_mixture(
      {Eigen::Vector2d(m, m), Eigen::Vector2d(m, -m)}, g.component_std);
  if (name == SettingName::kOneToTwo) {
    s.noise = isotropic_mixture({Eigen::Vector2d::Zero()}, g.noise_std);
  } else {
    s.noise = isotropic_mixture(
        {Eigen::Vector2d(-m, -m), Eigen::Vector2d(-m, m)}, g.component_std);
  }
  return s;
}

}  // namespace cgc::data
