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

// Gaussian-mixture generators for the 1m-2m and 2m-2m synthetic settings and
// the exact score of a mixture convolved with N(0, sigma^2 I).

#ifndef CGC_DATA_H_
#define CGC_DATA_H_

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cgc/nn.h"
#include "cgc/rng.h"

namespace cgc::data {

struct MixtureComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double weight = 1.0;
};

struct GaussianMixture {
  std::vector<MixtureComponent> components;

  Eigen::Index dim() const;
  // Weights positive and summing to 1 (within 1e-12), covariances SPD.
  void validate() const;
  // sqrt(E|x|^2 / d), the per-coordinate root second moment.
  double root_second_moment() const;
};

GaussianMixture isotropic_mixture(const std::vector<Eigen::VectorXd>& means,
                                  double component_std);

// Each column i.i.d.: component by weight, then a Gaussian draw.
Batch sample(const GaussianMixture& dist, Eigen::Index n, Rng& rng);
// Also reports the component drawn for each column.
Batch sample(const GaussianMixture& dist, Eigen::Index n, Rng& rng,
             std::vector<int>* labels);

// ln p_sigma(x) per column, p_sigma = dist * N(0, sigma^2 I).
Eigen::VectorXd perturbed_log_density(const GaussianMixture& dist,
                                      const Batch& x,
                                      const Eigen::VectorXd& sigma);
// grad_x ln p_sigma(x) per column, via responsibility-weighted component
// scores with covariance Sigma_k + sigma^2 I.
Batch analytic_perturbed_score(const GaussianMixture& dist, const Batch& x,
                               const Eigen::VectorXd& sigma);
Batch analytic_perturbed_score(const GaussianMixture& dist, const Batch& x,
                               double sigma);

enum class SettingName { kOneToTwo, kTwoToTwo };

SettingName parse_setting_name(const std::string& name);
std::string to_string(SettingName name);

// Default geometry: data modes at (2, 2) and (2, -2); 2m-2m noise modes at
// (-2, -2) and (-2, 2); component std 0.2; 1m-2m noise standard normal.
struct SettingGeometry {
  double mode_offset = 2.0;
  double component_std = 0.2;
  double noise_std = 1.0;  // 1m-2m only
};

struct ExperimentSetting {
  SettingName name = SettingName::kOneToTwo;
  GaussianMixture data;
  GaussianMixture noise;
  Eigen::Index n_samples = 10000;
};

ExperimentSetting make_setting(SettingName name, const SettingGeometry& geometry,
                               Eigen::Index n_samples);

}  // namespace cgc::data

#endif  // CGC_DATA_H_
