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

// Denoising score matching for a score network and the Euler discretization
// of the probability-flow ODE dx = -sigma grad log p_sigma(x) dsigma.

#ifndef CGC_SCORE_H_
#define CGC_SCORE_H_

#include <cstdint>
#include <functional>

#include "cgc/data.h"
#include "cgc/nn.h"
#include "cgc/schedule.h"

namespace cgc {

// Score from an EDM-preconditioned denoiser
//   D(y, sigma) = c_skip y + c_out F(c_in y, sigma),
//   c_skip = sd^2 / (sigma^2 + sd^2), c_out = sigma sd / sqrt(sigma^2 + sd^2),
//   c_in = 1 / sqrt(sigma^2 + sd^2),
// as s(y, sigma) = (D(y, sigma) - y) / sigma^2.
struct ScoreModel {
  nn::NetworkSpec spec;
  ParamVector params;
  double sigma_data = 1.0;
};

Batch denoise(const ScoreModel& model, const ParamVector& params, const Batch& y,
              const Eigen::VectorXd& sigma);
Batch model_score(const ScoreModel& model, const Batch& y,
                  const Eigen::VectorXd& sigma);

struct DsmResult {
  double loss = 0.0;
  ParamVector grad;
};

// mean_j w(sigma_j) |D(x_j + sigma_j z_j, sigma_j) - x_j|^2 with the EDM
// weight w = (sigma^2 + sd^2) / (sigma sd)^2, and its parameter gradient.
DsmResult dsm_loss(const ScoreModel& model, const ParamVector& params,
                   const Batch& x, const Batch& z, const Eigen::VectorXd& sigma);

using ScoreFn =
    std::function<Batch(const Batch& x, const Eigen::VectorXd& sigma)>;

ScoreFn analytic_score_fn(const data::GaussianMixture& dist);
ScoreFn model_score_fn(const ScoreModel& model);

// x_i = x_{i+1} - (sigma_i - sigma_{i+1}) sigma_{i+1} s(x_{i+1}, sigma_{i+1}).
Batch euler_pfode_update(const ScoreFn& score, const Batch& x_next,
                         const Eigen::VectorXd& sigma_i,
                         const Eigen::VectorXd& sigma_next);
Batch euler_pfode_update(const ScoreFn& score, const Batch& x_next,
                         double sigma_i, double sigma_next);

// Integrates from sigma_N (the caller supplies x at sigma_N) down to sigma_0.
Batch pfode_solve(const ScoreFn& score, const Batch& x_start,
                  const NoiseSchedule& schedule);

// Agreement between a score and a reference score on a set of points, each
// paired with its own noise level.
struct ScoreFitReport {
  double angular_error = 0.0;    // mean squared angle, radians^2
  double magnitude_error = 0.0;  // mean of ((|s| - |s_ref|) / |s_ref|)^2
  Eigen::Index n = 0;
};

ScoreFitReport score_fit(const ScoreFn& score, const ScoreFn& reference,
                         const Batch& x, const Eigen::VectorXd& sigma);

// Held-out check against the exact mixture score: n points per level, drawn
// from the perturbed data distribution at `levels` log-spaced noise levels
// in [sigma_lo, sigma_hi].
ScoreFitReport score_fit_to_mixture(const ScoreFn& score,
                                    const data::GaussianMixture& dist,
                                    double sigma_lo, double sigma_hi,
                                    int levels, Eigen::Index n, Rng& rng);

struct ScoreTrainConfig {
  nn::NetworkSpec spec;
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  std::int64_t steps = 10000;
  Eigen::Index batch_size = 512;
  double learning_rate = 1e-4;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  // Held-out fit thresholds checked after training, over [fit_sigma_min,
  // sigma_max].
  double fit_sigma_min = 0.05;
  double max_angular_error = 0.05;
  double max_magnitude_error = 0.05;
};

// Trains on mini-batches drawn with replacement from `pool`; noise levels are
// log-uniform on [sigma_min, sigma_max]. Returns EMA parameters.
ScoreModel train_score(const ScoreTrainConfig& config, const Batch& pool,
                       double sigma_data,
                       const std::function<void(std::int64_t, double)>&
                           on_loss = {});

}  // namespace cgc

#endif  // CGC_SCORE_H_
