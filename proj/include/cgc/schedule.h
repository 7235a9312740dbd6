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

// Noise-level grid, discretization curriculum, timestep distribution, loss
// weighting and forward-process coefficients.

#ifndef CGC_SCHEDULE_H_
#define CGC_SCHEDULE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgc/nn.h"
#include "cgc/rng.h"

namespace cgc {

// sigma_i = (sigma_min^(1/rho) + i/N (sigma_max^(1/rho) - sigma_min^(1/rho)))^rho
// for i = 0..N, with both endpoints stored exactly.
struct NoiseSchedule {
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  double rho = 3.0;
  int n_steps = 30;
  std::vector<double> grid;

  double sigma(int i) const { return grid.at(static_cast<std::size_t>(i)); }
};

NoiseSchedule build_grid(double sigma_min, double sigma_max, double rho,
                         int n_steps);

enum class CurriculumMode { kExponential, kFixed };

struct Curriculum {
  CurriculumMode mode = CurriculumMode::kFixed;
  int s0 = 10;
  int s1 = 1280;
  std::int64_t total_steps = 100000;
  int fixed_n = 30;

  // floor(K / (log2(s1 / s0) + 1)).
  std::int64_t doubling_interval() const;
  void validate() const;
};

// Exponential: min(s0 2^floor(k / K'), s1) + 1. Fixed: the constant.
int curriculum_n(const Curriculum& curriculum, std::int64_t k);

// Distribution over interval indices i in [0, N - 1]; interval i is the
// adjacent pair (sigma_i, sigma_{i+1}).
struct TimestepDistribution {
  bool uniform = false;
  double p_mean = -1.1;
  double p_std = 2.0;
  std::vector<double> weights;
};

// weights[i] proportional to erf((ln sigma_{i+1} - P_mean) / (sqrt 2 P_std))
//                          - erf((ln sigma_i     - P_mean) / (sqrt 2 P_std)).
TimestepDistribution timestep_weights(const NoiseSchedule& schedule,
                                      double p_mean, double p_std);
TimestepDistribution uniform_timesteps(const NoiseSchedule& schedule);

std::vector<int> sample_timesteps(const TimestepDistribution& dist,
                                  Eigen::Index n, Rng& rng);

// lambda(sigma_i) = 1 / (sigma_{i+1} - sigma_i).
double loss_weight(const NoiseSchedule& schedule, int i);

enum class ProcessKind {
  kEdm,             // x_i = x + sigma_i z
  kBridge,          // x_i = (1 - a) x + a z, a = sigma_i / (sigma_i + 1)
  kBridgeGaussian,  // x_i = (1 - a) x + a z, a = sigma_i (needs sigma_max <= 1)
  kBridgeGaussianAppendix,  // x_i = a x + (1 - a) z, a = sigma_i
};

ProcessKind parse_process_kind(const std::string& name);
std::string to_string(ProcessKind kind);

struct ProcessCoefficients {
  double data = 1.0;   // a_i
  double noise = 0.0;  // b_i
};

struct ForwardProcess {
  ProcessKind kind = ProcessKind::kEdm;

  ProcessCoefficients coefficients(const NoiseSchedule& schedule,
                                   int i) const;
  void validate(const NoiseSchedule& schedule) const;
};

// a_i x + b_i z for a single index shared by the whole batch.
Batch perturb(const ForwardProcess& process, const NoiseSchedule& schedule,
              const Batch& x, const Batch& z, int i);
// Per-sample indices; `offset` is added to every index (1 selects i + 1).
Batch perturb(const ForwardProcess& process, const NoiseSchedule& schedule,
              const Batch& x, const Batch& z, std::span<const int> indices,
              int offset = 0);

Eigen::VectorXd sigmas_at(const NoiseSchedule& schedule,
                          std::span<const int> indices, int offset = 0);

}  // namespace cgc

#endif  // CGC_SCHEDULE_H_
