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

// Consistency training with independent, generator-induced, mu-mixed or
// batch-OT couplings.

#ifndef CGC_TRAIN_H_
#define CGC_TRAIN_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "cgc/coupling.h"
#include "cgc/data.h"
#include "cgc/model.h"
#include "cgc/nn.h"
#include "cgc/optim.h"
#include "cgc/rng.h"
#include "cgc/schedule.h"

namespace cgc {

inline constexpr double kDivergenceThreshold = 1e8;

struct TrainConfig {
  data::SettingName setting = data::SettingName::kOneToTwo;
  data::SettingGeometry geometry;
  Eigen::Index n_samples = 10000;

  ProcessKind process = ProcessKind::kEdm;
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  double rho = 3.0;
  Curriculum curriculum;  // total_steps is taken from this config
  bool uniform_timesteps = false;
  double p_mean = -1.1;
  double p_std = 2.0;

  int hidden_dim = 256;
  int depth = 4;

  optim::OptimizerHyperparams optimizer;
  double ema_decay = 0.999;

  MixingPolicy mixing;
  bool use_ema_for_gc = true;
  bool batch_ot = false;

  Eigen::Index batch_size = 512;
  std::int64_t total_steps = 10000;
  DistanceFn distance;
  double loss_weight_scale = 1.0;
  std::uint64_t seed = 0;

  std::int64_t log_interval = 100;
  std::int64_t variance_interval = 10;  // 0 disables variance logging
  std::int64_t checkpoint_interval = 500;

  nn::NetworkSpec network_spec() const;
  void validate() const;
};

struct RngStreams {
  Rng data;
  Rng noise;
  Rng timestep;
  Rng mixing;
};

struct TrainState {
  std::int64_t step = 0;  // completed updates
  ParamVector params;
  optim::EmaState ema;
  optim::OptimizerState optimizer;
  RngStreams rng;
};

struct MetricsRecord {
  std::int64_t step = 0;
  std::string metric;
  double value = 0.0;
};

struct LossOptions {
  double weight_scale = 1.0;
  bool per_sample_moments = false;
  std::int64_t step = -1;  // for error messages
};

struct LossStep {
  double loss = 0.0;
  ParamVector grad;
  std::optional<nn::GradientMoments> moments;  // per-sample loss gradients
};

// mean_j lambda(sigma_i) D(sg(f(x_i, sigma_i)), f(x_{i+1}, sigma_{i+1})) with
// (x_i, x_{i+1}) built from the batch's (x, z, i); the gradient flows only
// through the (i + 1) branch.
LossStep consistency_loss_step(const ConsistencyModel& model,
                               const ParamVector& params,
                               const CouplingBatch& batch,
                               const ForwardProcess& process,
                               const NoiseSchedule& schedule,
                               const DistanceFn& distance,
                               const LossOptions& options = {});

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_metric;
  std::function<void(const TrainState&)> on_checkpoint;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const data::ExperimentSetting& setting() const { return setting_; }
  const Batch& pool() const { return pool_; }
  // Architecture and boundary parametrization; params left empty.
  const ConsistencyModel& model() const { return model_; }
  ForwardProcess process() const { return {config_.process}; }
  NoiseSchedule schedule_at(std::int64_t k) const;

  TrainState initial_state() const;
  // One iteration of the training loop; advances state.step by one.
  void step(TrainState& state, const TrainHooks& hooks = {}) const;
  // Steps until state.step == total_steps. On a numeric failure `state`
  // holds the last completed step.
  void run(TrainState& state, const TrainHooks& hooks = {}) const;

 private:
  TrainConfig config_;
  data::ExperimentSetting setting_;
  Batch pool_;
  ConsistencyModel model_;
  NoiseSchedule full_schedule_;
};

TrainState train(const TrainConfig& config, const TrainHooks& hooks = {});

// One-step generation f(b_N z, sigma_N); the a_N x term is dropped.
Batch generate(const ConsistencyModel& model, const ParamVector& params,
               const Batch& noise, const ForwardProcess& process,
               const NoiseSchedule& schedule);

}  // namespace cgc

#endif  // CGC_TRAIN_H_
