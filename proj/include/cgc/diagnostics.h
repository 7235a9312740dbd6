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

#ifndef CGC_DIAGNOSTICS_H_
#define CGC_DIAGNOSTICS_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgc/coupling.h"
#include "cgc/data.h"
#include "cgc/model.h"
#include "cgc/nn.h"
#include "cgc/rng.h"
#include "cgc/schedule.h"
#include "cgc/score.h"

namespace cgc {

inline constexpr char kVarianceEstimator[] = "mean_param_per_sample_variance";

struct VarianceReport {
  std::int64_t step = 0;
  double variance = 0.0;
  std::string estimator = kVarianceEstimator;
};

// Mean over parameters of the unbiased per-parameter variance of the
// per-sample gradients summarized by `moments`.
double variance_from_moments(const nn::GradientMoments& moments);

VarianceReport gradient_variance(const ConsistencyModel& model,
                                 const ParamVector& params,
                                 const CouplingBatch& batch,
                                 const ForwardProcess& process,
                                 const NoiseSchedule& schedule,
                                 const DistanceFn& distance,
                                 std::int64_t step = 0,
                                 double weight_scale = 1.0);

// Maps (x_i, sigma_i) to the generator endpoint x_hat.
using EndpointFn =
    std::function<Batch(const Batch& x, const Eigen::VectorXd& sigma)>;

EndpointFn consistency_endpoint(const ConsistencyModel& model,
                                const ParamVector& params);

struct TransportReport {
  std::vector<int> timestep;
  std::vector<double> sigma;
  std::vector<double> ic_cost;  // mean per timestep
  std::vector<double> gc_cost;
  std::vector<double> ic_stderr;
  std::vector<double> gc_stderr;
  // Per-sample costs, indexed [timestep][sample]; empty unless requested.
  std::vector<std::vector<double>> ic_samples;
  std::vector<std::vector<double>> gc_samples;
};

struct TransportOptions {
  Eigen::Index n = 10000;
  bool keep_samples = false;
  bool ic_only = false;  // skip the generator; gc_* stay empty
};

// For every grid index i, draws n fresh (x, z) and reports E||x - x_i||^2 and
// E||x_hat - x~_i||^2 with x_hat = endpoint(x_i, sigma_i) and x~_i built from
// (x_hat, z, i).
TransportReport transport_cost(const EndpointFn& endpoint,
                               const data::ExperimentSetting& setting,
                               const ForwardProcess& process,
                               const NoiseSchedule& schedule,
                               const TransportOptions& options, Rng& rng);

struct PfodeDistanceReport {
  std::int64_t step = 0;
  Eigen::Index n = 0;
  double ic_distance = 0.0;
  double gc_distance = 0.0;
  double ic_stderr = 0.0;
  double gc_stderr = 0.0;
  // Per interval index: mean distances and sample counts.
  std::vector<double> ic_by_timestep;
  std::vector<double> gc_by_timestep;
  std::vector<Eigen::Index> count_by_timestep;
};

// Distance of IC and GC training pairs to one Euler PF-ODE step driven by
// `score`, with i drawn from `timesteps`. EDM only.
PfodeDistanceReport pfode_distance(const EndpointFn& endpoint,
                                   const ScoreFn& score,
                                   const data::ExperimentSetting& setting,
                                   const ForwardProcess& process,
                                   const NoiseSchedule& schedule,
                                   const TimestepDistribution& timesteps,
                                   Eigen::Index n, Rng& rng,
                                   std::int64_t step = 0);

// 2E||A - B|| - E||A - A'|| - E||B - B'|| with U-statistics for the
// within-set terms.
double energy_distance(const Batch& a, const Batch& b);

// Fraction of samples whose nearest component mean is each component's.
std::vector<double> mode_balance(const Batch& samples,
                                 const data::GaussianMixture& mixture);

}  // namespace cgc

#endif  // CGC_DIAGNOSTICS_H_
